"""Tests for Rips persistence: edges, radii, H0/H1 diagrams and subsampling."""

import math
from itertools import combinations

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from qwed_topobo.errors import InputError, ResourceError
from qwed_topobo.models import H0, H1, PointCloud
from qwed_topobo.topology.persistence import (
    compute_diagrams,
    compute_h0,
    compute_h1,
    count_triangles,
    default_h0_radius,
    enclosing_radius,
    rips_edges,
    subsample_maxmin,
)

SQUARE = PointCloud("square", [[0, 0], [1, 0], [1, 1], [0, 1]], label=0.0)


def _circle(n, radius=1.0):
    t = 2 * np.pi * np.arange(n) / n
    return PointCloud("circle", np.column_stack([radius * np.cos(t), radius * np.sin(t)]))


def naive_diagrams(cloud, max_radius, max_dim=2):
    """
    Full boundary-matrix reduction over GF(2), no clearing, no shortcuts.

    Simplices up to ``max_dim`` with value ≤ max_radius, ordered by
    (value, dimension, vertices). Returns {degree: sorted finite pairs}.
    """
    radius = squareform(pdist(cloud.points)) / 2.0
    n = cloud.size
    simplices = [(0.0, 0, (i,)) for i in range(n)]
    for i, j in combinations(range(n), 2):
        if radius[i, j] <= max_radius:
            simplices.append((radius[i, j], 1, (i, j)))
    if max_dim >= 2:
        for i, j, k in combinations(range(n), 3):
            value = max(radius[i, j], radius[i, k], radius[j, k])
            if value <= max_radius:
                simplices.append((value, 2, (i, j, k)))
    simplices.sort()
    position = {s[2]: p for p, s in enumerate(simplices)}

    columns = []
    for value, dim, verts in simplices:
        if dim == 0:
            columns.append(set())
        else:
            columns.append({position[face] for face in combinations(verts, dim)})

    pairs = {0: [], 1: []}
    low_of = {}
    for j, column in enumerate(columns):
        while column and max(column) in low_of:
            column ^= columns[low_of[max(column)]]
        if column:
            low = max(column)
            low_of[low] = j
            birth, death = simplices[low][0], simplices[j][0]
            degree = simplices[low][1]
            if death > birth and degree in pairs:
                pairs[degree].append((float(birth), float(death)))
    return {degree: sorted(points) for degree, points in pairs.items()}


class TestRipsEdges:
    """Test filtered edge enumeration."""

    def test_two_points_single_edge(self):
        """Two points at distance 2 give one edge of value 1."""
        cloud = PointCloud("pair", [[0, 0], [2, 0]])
        edges = rips_edges(cloud, 10.0)
        assert len(edges) == 1
        assert edges[0].value == 1.0
        assert (edges[0].i, edges[0].j) == (0, 1)

    def test_threshold_excludes_edge(self):
        """An edge above max_radius is left out."""
        cloud = PointCloud("pair", [[0, 0], [2, 0]])
        assert rips_edges(cloud, 0.5) == []

    def test_unit_square_values(self):
        """Unit square: four sides at 0.5, two diagonals at √2/2, sorted."""
        edges = rips_edges(SQUARE, 10.0)
        values = [e.value for e in edges]
        assert values[:4] == [0.5] * 4
        assert values[4:] == pytest.approx([math.sqrt(2) / 2] * 2)

    def test_ties_broken_lexicographically(self):
        """Equal values keep (i, j) order."""
        edges = rips_edges(SQUARE, 10.0)
        sides = [(e.i, e.j) for e in edges[:4]]
        assert sides == sorted(sides)

    def test_non_positive_radius_rejected(self):
        """max_radius must be positive."""
        with pytest.raises(InputError, match="positive"):
            rips_edges(SQUARE, 0.0)


class TestRadii:
    """Test default filtration radii."""

    def test_enclosing_radius_single_point(self):
        """A single point has enclosing radius 0."""
        assert enclosing_radius(PointCloud("p", [[1.0, 2.0]])) == 0.0

    def test_enclosing_radius_pair(self):
        """Two points at distance 2 have enclosing radius 1."""
        assert enclosing_radius(PointCloud("pair", [[0, 0], [2, 0]])) == 1.0

    def test_enclosing_radius_square(self):
        """Every corner's farthest neighbour is the diagonal."""
        assert enclosing_radius(SQUARE) == pytest.approx(math.sqrt(2) / 2)

    def test_default_h0_radius_is_half_diameter(self):
        """H0 default covers the longest pairwise distance."""
        cloud = PointCloud("line", [[0, 0], [1, 0], [5, 0]])
        assert default_h0_radius(cloud) == 2.5


class TestComputeH0:
    """Test the union-find H0 diagram."""

    def test_pair(self):
        """A single merge at r = 1."""
        D = compute_h0(PointCloud("pair", [[0, 0], [2, 0]]))
        assert D.sorted_pairs() == [(0.0, 1.0)]

    def test_unit_square(self):
        """MST of the square has three sides of length 1."""
        D = compute_h0(SQUARE)
        assert D.sorted_pairs() == [(0.0, 0.5)] * 3

    def test_identical_points_give_empty_diagram(self):
        """Zero-persistence merges are dropped."""
        D = compute_h0(PointCloud("same", [[1.0, 1.0]] * 5))
        assert len(D) == 0

    def test_disconnected_components_are_essential(self):
        """Components alive at max_radius are excluded."""
        cloud = PointCloud("two-pairs", [[0, 0], [1, 0], [10, 0], [11, 0]])
        D = compute_h0(cloud, max_radius=1.0)
        assert D.sorted_pairs() == [(0.0, 0.5), (0.0, 0.5)]

    def test_connected_cloud_has_n_minus_one_points(self):
        """Generic connected cloud: N − 1 finite deaths."""
        rng = np.random.default_rng(3)
        cloud = PointCloud("rand", rng.random((12, 2)))
        assert len(compute_h0(cloud)) == 11

    def test_non_positive_radius_rejected(self):
        """Explicit max_radius must be positive."""
        with pytest.raises(InputError):
            compute_h0(SQUARE, max_radius=-1.0)


class TestComputeH1:
    """Test H1 persistence of the Rips 2-skeleton."""

    def test_unit_square_loop(self):
        """Loop born at 0.5, killed by the first triangle at √2/2."""
        D = compute_h1(SQUARE)
        assert len(D) == 1
        birth, death = D.sorted_pairs()[0]
        assert birth == 0.5
        assert death == pytest.approx(math.sqrt(2) / 2)

    def test_collinear_points_have_no_loops(self):
        """A path has no surviving 1-cycles."""
        D = compute_h1(PointCloud("line", [[0, 0], [1, 0], [2, 0]]))
        assert len(D) == 0

    def test_circle_has_one_loop(self):
        """Twenty points on a unit circle carry exactly one loop."""
        cloud = _circle(20)
        D = compute_h1(cloud)
        assert len(D) == 1
        assert D.sorted_pairs() == naive_diagrams(cloud, enclosing_radius(cloud))[1]

    def test_radius_below_cycle_edges_is_empty(self):
        """No cycle-forming edge below max_radius means no H1 point."""
        assert len(compute_h1(SQUARE, max_radius=0.49)) == 0
        assert len(compute_h1(_circle(20), max_radius=0.1)) == 0

    def test_small_clouds_are_empty(self):
        """Fewer than 3 points cannot carry a loop."""
        assert len(compute_h1(PointCloud("pair", [[0, 0], [2, 0]]))) == 0
        assert len(compute_h1(PointCloud("one", [[0, 0]]))) == 0

    def test_simplex_budget_guard(self):
        """Exceeding the triangle budget asks for subsampling."""
        with pytest.raises(ResourceError, match="Subsample"):
            compute_h1(_circle(20), simplex_budget=10)

    def test_count_triangles_matches_enumeration(self):
        """trace(A³)/6 equals the brute-force count."""
        rng = np.random.default_rng(0)
        cloud = PointCloud("rand", rng.random((15, 2)))
        radius = squareform(pdist(cloud.points)) / 2.0
        expected = sum(
            1
            for i, j, k in combinations(range(15), 3)
            if max(radius[i, j], radius[i, k], radius[j, k]) <= 0.3
        )
        assert count_triangles(cloud, 0.3) == expected

    def test_deterministic(self):
        """Same input gives bit-identical diagrams."""
        rng = np.random.default_rng(11)
        cloud = PointCloud("rand", rng.random((20, 2)))
        assert np.array_equal(compute_h1(cloud).points, compute_h1(cloud).points)


class TestOracleEquivalence:
    """Fast paths agree pair for pair with the naive full reduction."""

    def test_random_clouds(self):
        """200 random planar clouds of up to 25 points."""
        rng = np.random.default_rng(2024)
        for trial in range(200):
            n = int(rng.integers(3, 13)) if trial < 190 else 25
            cloud = PointCloud(f"c{trial}", rng.random((n, 2)))
            r0 = default_h0_radius(cloud)
            r1 = enclosing_radius(cloud)
            assert compute_h0(cloud, r0).sorted_pairs() == naive_diagrams(cloud, r0, 1)[0]
            assert compute_h1(cloud, r1).sorted_pairs() == naive_diagrams(cloud, r1)[1]

    def test_truncated_radius(self):
        """Agreement also holds below the default radii."""
        rng = np.random.default_rng(7)
        for trial in range(20):
            cloud = PointCloud(f"c{trial}", rng.random((10, 2)))
            r = 0.6 * enclosing_radius(cloud)
            oracle = naive_diagrams(cloud, r)
            assert compute_h0(cloud, r).sorted_pairs() == oracle[0]
            assert compute_h1(cloud, r).sorted_pairs() == oracle[1]

    def test_lattice_ties(self):
        """Grids with many equal distances exercise tie-breaking."""
        xs, ys = np.meshgrid(np.arange(4.0), np.arange(3.0))
        cloud = PointCloud("grid", np.column_stack([xs.ravel(), ys.ravel()]))
        r = enclosing_radius(cloud)
        oracle = naive_diagrams(cloud, r)
        assert compute_h0(cloud, r).sorted_pairs() == oracle[0]
        assert compute_h1(cloud, r).sorted_pairs() == oracle[1]


class TestStability:
    """H0 deaths move by at most the point displacement."""

    def test_perturbation_bound(self):
        """Displacing each point by ≤ ε moves each sorted death by ≤ ε."""
        rng = np.random.default_rng(5)
        eps = 1e-3
        for _ in range(20):
            pts = rng.random((15, 2))
            direction = rng.normal(size=pts.shape)
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            moved = pts + eps * rng.random((15, 1)) * direction
            d1 = np.sort(compute_h0(PointCloud("a", pts)).deaths)
            d2 = np.sort(compute_h0(PointCloud("b", moved)).deaths)
            assert len(d1) == len(d2)
            assert np.max(np.abs(d1 - d2)) <= eps + 1e-12


class TestSubsampleMaxmin:
    """Test farthest-point subsampling."""

    def test_full_size_is_same_set(self):
        """m = N keeps every point."""
        sub = subsample_maxmin(SQUARE, 4, seed=3)
        assert sorted(map(tuple, sub.points)) == sorted(map(tuple, SQUARE.points))

    def test_single_point_is_seed_choice(self):
        """m = 1 returns the seed-chosen point."""
        rng = np.random.default_rng(9)
        cloud = PointCloud("rand", rng.random((30, 3)), label=1.5)
        sub = subsample_maxmin(cloud, 1, seed=4)
        start = int(np.random.default_rng(4).integers(30))
        assert np.array_equal(sub.points, cloud.points[[start]])

    def test_square_picks_diagonal(self):
        """From any start the second pick is the opposite corner."""
        starts = set()
        for seed in range(100):
            sub = subsample_maxmin(SQUARE, 2, seed=seed)
            starts.add(tuple(sub.points[0]))
            assert np.linalg.norm(sub.points[0] - sub.points[1]) == pytest.approx(math.sqrt(2))
        assert len(starts) == 4

    def test_preserves_id_and_label(self):
        """Subsampling keeps the cloud identity."""
        sub = subsample_maxmin(SQUARE, 2, seed=0)
        assert sub.id == SQUARE.id
        assert sub.label == SQUARE.label

    def test_zero_rejected(self):
        """m = 0 is an input error."""
        with pytest.raises(InputError):
            subsample_maxmin(SQUARE, 0)

    def test_deterministic(self):
        """Same seed, same subsample."""
        rng = np.random.default_rng(1)
        cloud = PointCloud("rand", rng.random((50, 2)))
        a = subsample_maxmin(cloud, 10, seed=2)
        b = subsample_maxmin(cloud, 10, seed=2)
        assert np.array_equal(a.points, b.points)


class TestComputeDiagrams:
    """Test the per-cloud convenience wrapper."""

    def test_both_degrees(self):
        """Default degrees return H0 and H1."""
        out = compute_diagrams(SQUARE)
        assert set(out) == {H0, H1}
        assert len(out[H0]) == 3
        assert len(out[H1]) == 1

    def test_single_point_gives_empty_diagrams(self):
        """Degenerate clouds return empty diagrams instead of failing."""
        out = compute_diagrams(PointCloud("one", [[0.0, 0.0]]))
        assert len(out[H0]) == 0
        assert len(out[H1]) == 0

    def test_subsample_applied_first(self):
        """Subsampling to 2 points leaves one H0 point and no loop."""
        out = compute_diagrams(_circle(20), subsample=2, seed=0)
        assert len(out[H0]) == 1
        assert len(out[H1]) == 0
