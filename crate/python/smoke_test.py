"""Quick end-to-end check of the Python bindings."""

import math

import tripod


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    atom = tripod.Tripod(rabi_khz=450.0, temperature_uk=0.5)
    assert close(atom.decoherence_time(), 23.78, 0.05), atom.decoherence_time()
    assert close(atom.omega_v(), 4.0 / 3.0 * atom.recoil, 1e-12)

    loop = tripod.PhaseLoop.canonical(math.pi)
    u = loop.holonomy()
    det = u[0][0] * u[1][1] - u[0][1] * u[1][0]
    assert close(abs(det), 1.0, 1e-12)

    w = tripod.nonabelian(loop)
    assert close(w["distance"], 1.125, 1e-9), w["distance"]
    assert w["conjugacy_residual"] < 1e-12

    hold = tripod.ensemble_hold(atom, [0.0, 10.0, 40.0], tripod.preset_d2())
    for t, p in zip(hold["times"], hold["populations"]):
        want = atom.mean_populations(t)
        assert all(close(x, y, 1e-9) for x, y in zip(p, want)), (p, want)

    pinned = tripod.Tripod(temperature_uk=1e-12, recoil_khz=0.0)
    inputs = [tripod.preset_d2(), tripod.preset_mixed_measured()]
    pops = [tripod.ensemble_loop(pinned, loop, d)["populations"][-1] for d in inputs]
    fit = tripod.unitary_from_populations(inputs, pops, u)
    assert fit["distance_to_prediction"] < 1e-6, fit

    ig = tripod.ignite(atom, "d2")
    assert ig["fidelity"] >= 0.95

    csv, summary = tripod.run_scenario("loop", "[loop]\nphi0_over_pi = 1\n")
    assert "D_shift1,1.125" in csv

    try:
        tripod.Tripod(temperature_uk=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative temperature accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
