from qwed_topobo import RunConfig, TopologicalBO, gen_orbit, table_configs


def run_orbit_demo():
    print("🔭 QWED-TopoBO on the linked twist map")
    pool = gen_orbit(M=60, N=120, seed=1)
    bo = TopologicalBO(pool)
    print(f"Pool: {len(pool)} clouds, best r = {pool.minimum():.4f}")

    # Case 1: a single BO run on H1
    print("\n--- 📈 Case 1: PWGK-Linear on H1 ---")
    trace = bo.run(RunConfig(degrees="h1", n_init=5, n_steps=15))
    print(f"Chosen: {', '.join(trace.chosen_ids()[:5])} ...")
    print(f"Best found {trace.best_curve()[-1]:.4f}, AUCC {trace.aucc:.4f}")

    # Case 2: both degrees with likelihood-based weights
    print("\n--- ⚖️ Case 2: PWGK-Linear with MLE weights over H0 and H1 ---")
    trace = bo.run(RunConfig(degrees="both", mkl="mle", n_init=5, n_steps=15))
    print(f"Final weights: {trace.diagnostics[-1].get('alpha')}")
    print(f"Best found {trace.best_curve()[-1]:.4f}, AUCC {trace.aucc:.4f}")

    # Case 3: the four-row table against random search
    print("\n--- 🎲 Case 3: Benchmark against random search ---")
    base = RunConfig(n_init=5, n_steps=15, repeats=5)
    print(bo.benchmark(table_configs("pwgk_linear", base)).to_text())


if __name__ == "__main__":
    run_orbit_demo()
