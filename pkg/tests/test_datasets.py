"""Tests for the orbit generator and pool loading."""

import json
import os

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from qwed_topobo import TopologicalBO
from qwed_topobo.config import RunConfig
from qwed_topobo.datasets.io import Pool, load_jsonl, load_pool, load_xyz_dir, save_jsonl
from qwed_topobo.datasets.orbit import (
    DEFAULT_CLOUDS,
    DEFAULT_POINTS,
    DEFAULT_R_MAX,
    DEFAULT_R_MIN,
    gen_orbit,
    orbit_points,
)
from qwed_topobo.errors import DataError, DataParseError, InputError
from qwed_topobo.models import H0, H1, PointCloud
from qwed_topobo.topology.cache import compute_pool_diagrams
from qwed_topobo.topology.persistence import compute_h1

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures", "toy_molecules")

WATER = """3
water y=-6.3
O 0.000 0.000 0.117
H 0.000 0.757 -0.467
H 0.000 -0.757 -0.467
"""


class TestOrbit:
    """Test the linked twist map generator."""

    def test_defaults(self):
        """Full-scale defaults: 1000 clouds of 1000 points, r in [2.0, 4.3]."""
        assert (DEFAULT_CLOUDS, DEFAULT_POINTS) == (1000, 1000)
        assert (DEFAULT_R_MIN, DEFAULT_R_MAX) == (2.0, 4.3)

    def test_shape_and_range(self):
        """Every coordinate lies in [0, 1) and labels in [r_min, r_max)."""
        pool = gen_orbit(M=20, N=50, seed=3)
        assert len(pool) == 20
        assert all(cloud.points.shape == (50, 2) for cloud in pool)
        points = np.vstack([cloud.points for cloud in pool])
        assert points.min() >= 0.0 and points.max() < 1.0
        labels = pool.labels()
        assert labels.min() >= 2.0 and labels.max() < 4.3
        assert pool.ids()[0] == "orbit-00000"

    def test_fixed_point_at_origin(self):
        """(0, 0) maps to itself for every r."""
        orbit = orbit_points(np.zeros(3), np.zeros(3), np.array([2.0, 3.0, 4.3]), 10)
        assert not orbit.any()

    def test_single_step(self):
        """One map application follows the recurrence."""
        orbit = orbit_points(np.array([0.1]), np.array([0.2]), np.array([3.0]), 2)
        x1 = (0.1 + 3.0 * 0.2 * 0.8) % 1.0
        y1 = (0.2 + 3.0 * x1 * (1.0 - x1)) % 1.0
        assert orbit[0, 1] == pytest.approx([x1, y1])

    def test_reproducible(self):
        """Same arguments, bit-identical pools."""
        a, b = gen_orbit(M=5, N=30, seed=11), gen_orbit(M=5, N=30, seed=11)
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.points, cb.points)
            assert ca.label == cb.label
        c = gen_orbit(M=5, N=30, seed=12)
        assert not np.array_equal(a[0].points, c[0].points)

    def test_prefix_stable(self):
        """Cloud i does not depend on how many clouds are generated."""
        small, large = gen_orbit(M=3, N=20, seed=4), gen_orbit(M=8, N=20, seed=4)
        assert np.array_equal(small[2].points, large[2].points)

    def test_shared_start(self):
        """shared_start reuses one initial point."""
        pool = gen_orbit(M=4, N=10, seed=5, shared_start=True)
        starts = np.array([cloud.points[0] for cloud in pool])
        assert np.all(starts == starts[0])

    def test_provenance(self):
        """Generator parameters travel with the pool."""
        pool = gen_orbit(M=2, N=5, seed=6)
        assert pool.provenance == "orbit"
        assert pool.params["seed"] == 6 and pool.params["N"] == 5

    def test_invalid_arguments(self):
        """Empty sizes and inverted ranges are rejected."""
        with pytest.raises(InputError, match="M ≥ 1"):
            gen_orbit(M=0, N=10)
        with pytest.raises(InputError, match="r_min < r_max"):
            gen_orbit(M=2, N=10, r_min=3.0, r_max=3.0)

    def test_label_detectable_from_h1(self):
        """Small-r and large-r groups differ in H1 total persistence."""
        low = gen_orbit(M=25, N=150, r_min=2.0, r_max=2.05, seed=20)
        high = gen_orbit(M=25, N=150, r_min=4.25, r_max=4.3, seed=21)
        low_tp = [compute_h1(cloud, 0.2).total_persistence() for cloud in low]
        high_tp = [compute_h1(cloud, 0.2).total_persistence() for cloud in high]
        assert mannwhitneyu(low_tp, high_tp, alternative="two-sided").pvalue < 0.01


class TestPool:
    """Test pool invariants."""

    def test_duplicate_id(self):
        """Ids must be unique."""
        cloud = PointCloud("a", [[0.0, 0.0]], label=1.0)
        with pytest.raises(InputError, match="Duplicate"):
            Pool((cloud, cloud))

    def test_empty(self):
        """A pool needs at least one cloud."""
        with pytest.raises(DataError, match="empty pool"):
            Pool(())

    def test_mixed_dimensions(self):
        """All clouds share one dimension."""
        with pytest.raises(DataError, match="Dimension mismatch"):
            Pool((PointCloud("a", [[0.0, 0.0]], 1.0), PointCloud("b", [[0.0, 0.0, 0.0]], 2.0)))

    def test_unlabelled(self):
        """Every cloud carries a label."""
        with pytest.raises(DataError, match="no label"):
            Pool((PointCloud("a", [[0.0, 0.0]]),))

    def test_permuted(self):
        """permuted reorders clouds and keeps provenance."""
        pool = gen_orbit(M=4, N=5, seed=0)
        flipped = pool.permuted([3, 2, 1, 0])
        assert flipped.ids() == list(reversed(pool.ids()))
        assert flipped.provenance == pool.provenance

    def test_summary(self):
        """summary reports size, dimension and label range."""
        summary = gen_orbit(M=4, N=5, seed=0).summary()
        assert summary["size"] == 4 and summary["dim"] == 2
        assert summary["label_min"] <= summary["label_max"]


class TestJsonl:
    """Test JSON Lines pools."""

    def test_save_and_load(self, tmp_path):
        """A saved pool loads back with the same ids, points and labels."""
        path = str(tmp_path / "pool.jsonl")
        pool = gen_orbit(M=3, N=10, seed=1)
        save_jsonl(pool, path)
        loaded = load_jsonl(path)
        assert loaded.ids() == pool.ids()
        assert np.array_equal(loaded.labels(), pool.labels())
        assert np.array_equal(loaded[1].points, pool[1].points)

    def test_blank_lines_skipped(self, tmp_path):
        """Blank lines between records are ignored."""
        path = tmp_path / "pool.jsonl"
        record = {"id": "a", "points": [[0.0, 1.0]], "y": 1.5}
        path.write_text("\n" + json.dumps(record) + "\n\n", encoding="utf-8")
        assert len(load_jsonl(str(path))) == 1

    def test_invalid_json_line(self, tmp_path):
        """Broken JSON names its line."""
        path = tmp_path / "pool.jsonl"
        path.write_text('{"id": "a", "points": [[0, 0]], "y": 1}\n{oops\n', encoding="utf-8")
        with pytest.raises(DataParseError, match=":2:"):
            load_jsonl(str(path))

    def test_missing_label(self, tmp_path):
        """A record without y is a parse error."""
        path = tmp_path / "pool.jsonl"
        path.write_text('{"id": "a", "points": [[0, 0]]}\n', encoding="utf-8")
        with pytest.raises(DataParseError, match="Missing field 'y'"):
            load_jsonl(str(path))

    def test_mixed_dimensions(self, tmp_path):
        """Clouds of different dimension cannot share a pool."""
        path = tmp_path / "pool.jsonl"
        lines = [
            json.dumps({"id": "a", "points": [[0, 0]], "y": 1}),
            json.dumps({"id": "b", "points": [[0, 0, 0]], "y": 2}),
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(DataError, match="Dimension mismatch"):
            load_jsonl(str(path))

    def test_empty_file(self, tmp_path):
        """A file without records is an empty pool."""
        path = tmp_path / "pool.jsonl"
        path.write_text("\n", encoding="utf-8")
        with pytest.raises(DataError, match="empty pool"):
            load_jsonl(str(path))


class TestXyz:
    """Test XYZ directory ingestion."""

    def test_water(self, tmp_path):
        """Three atoms, elements ignored, label from the comment line."""
        (tmp_path / "water.xyz").write_text(WATER, encoding="utf-8")
        pool = load_xyz_dir(str(tmp_path))
        assert pool.ids() == ["water"]
        assert pool[0].label == -6.3
        assert pool[0].points.shape == (3, 3)
        assert pool[0].points[1].tolist() == [0.0, 0.757, -0.467]

    def test_count_mismatch(self, tmp_path):
        """Declared and actual atom counts must agree."""
        (tmp_path / "bad.xyz").write_text(WATER.replace("3\n", "4\n", 1), encoding="utf-8")
        with pytest.raises(DataParseError, match="Declared 4 atoms"):
            load_xyz_dir(str(tmp_path))

    def test_missing_label(self, tmp_path):
        """The comment line must carry y=<real>."""
        (tmp_path / "bad.xyz").write_text(WATER.replace("y=-6.3", "energy"), encoding="utf-8")
        with pytest.raises(DataParseError, match=":2:"):
            load_xyz_dir(str(tmp_path))

    def test_bad_coordinate(self, tmp_path):
        """A non-numeric coordinate names its line."""
        (tmp_path / "bad.xyz").write_text(WATER.replace("0.757", "abc"), encoding="utf-8")
        with pytest.raises(DataParseError, match=":4:"):
            load_xyz_dir(str(tmp_path))

    def test_empty_directory(self, tmp_path):
        """A directory without .xyz files is an empty pool."""
        with pytest.raises(DataError, match="empty pool"):
            load_xyz_dir(str(tmp_path))

    def test_load_pool_dispatch(self, tmp_path):
        """Directories load as XYZ, files as JSON Lines."""
        assert len(load_pool(FIXTURES)) == 30
        path = str(tmp_path / "pool.jsonl")
        save_jsonl(gen_orbit(M=2, N=5, seed=0), path)
        assert len(load_pool(path)) == 2


class TestToyMoleculePipeline:
    """Run the full pipeline on the bundled XYZ fixture."""

    def setup_method(self):
        self.pool = load_xyz_dir(FIXTURES)

    def test_fixture_loads(self):
        """30 labelled 3-D clouds in file-name order."""
        assert len(self.pool) == 30
        assert self.pool.dim == 3
        assert self.pool.ids()[:2] == ["ring-00", "ring-01"]

    def test_diagrams_and_bo(self):
        """Diagrams for both degrees, then BO with MKL over them."""
        diagrams = compute_pool_diagrams(list(self.pool), [H0, H1])
        assert len(diagrams[H0]) == len(diagrams[H1]) == 30
        bo = TopologicalBO(self.pool)
        trace = bo.run(RunConfig(degrees="both", mkl="mle", n_init=4, n_steps=6))
        assert len(trace.steps) == 6
        assert trace.best_curve()[-1] >= self.pool.minimum()
