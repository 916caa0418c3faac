"""Smoke test for the ion_reservoir Python extension.

Build and install first:  pip install maturin && maturin develop -m crates/py/Cargo.toml
"""

import math

import ion_reservoir as ir

DIM = 30


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    vac = ir.State.vacuum(DIM)
    close(vac.trace().real, 1.0, 1e-12)
    close(vac.fidelity(vac), 1.0, 1e-12)

    th = ir.State.thermal(DIM, 0.5)
    close(th.mean_occupation(), 0.5, 1e-6)
    d = th.diagnostics()
    assert d["min_eigenvalue"] >= -1e-12

    # Cooling drives a number state toward vacuum.
    cooling = ir.Channel.preset("cooling", DIM)
    traj = ir.evolve(ir.State.number(DIM, 2), cooling, 200)
    assert len(traj) == 201
    assert traj[-1].fidelity(vac) > 0.99

    # Steady state of the displaced squeezed channel.
    alpha = 0.48j
    chans = ir.Channel.preset("squeezed_coherent", DIM, r=0.11, alpha=alpha)
    ss, info = ir.steady_state(chans)
    target = ir.State.squeezed_coherent(DIM, 0.11, alpha)
    assert 1 - ss.fidelity(target) < 1e-5, ss.fidelity(target)
    assert info["gap"] > info["kernel_eigenvalue"]

    # Explicit channel matches the preset rescaling for K' = a.
    ideal = ir.Channel.ideal(DIM, cooling[0].epsilon)
    a = ideal.k_prime()
    close(abs(a[0][1]), 1.0, 1e-12)
    close(abs(a[1][2]), math.sqrt(2), 1e-12)

    otto = ir.OttoParams(1.0, 0.8, 0.25, alpha=0.4j)
    close(otto.efficiency(), 0.5, 1e-9)
    close(otto.otto_reference(), 0.2, 1e-12)
    e = otto.energetics()
    close(e["w1"] + e["q2"] + e["w3"] + e["q4"], 0.0, 1e-9)
    w_num, eff_num = otto.energetics_numeric(60)
    close(eff_num, 0.5, 1e-4)

    rate, gamma = ir.reset_rate(0.02)
    close(rate / gamma, 1.0, 0.05)
    pops = ir.full_reset([0.0, 0.5, 0.5, 0.0], 0.02)
    assert pops[0] > 0.99, pops

    try:
        ir.State.thermal(1, 0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("dimension below the minimum accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
