"""Compare the compiled and numpy kernel backends on a patch-test interface.

Usage::

    python3 benchmarks/bench_kernels.py [--divisions 12] [--repeat 5]

Times contact-state construction (clipping, edge clipping, vertex
projection) and the barrier energy/gradient/Hessian assembly for each
available backend, and checks that both produce the same numbers.
"""
import argparse
import time

import numpy as np

from mortarcontact import _kernels
from mortarcontact.contact import BarrierParams, build_candidate_pairs, build_contact_state
from mortarcontact.contact.potential import contact_energy_grad_hess
from mortarcontact.geometry import extract_boundary_surface, make_block


def interface(n):
    bottom = make_block((1, 1, 0.5), (n, n, 1))
    top = make_block((1, 1, 0.5), (n - 1, n - 1, 1), (0, 0, 0.5005))
    sb, st = extract_boundary_surface(bottom), extract_boundary_surface(top)
    slave = sb.subset(np.flatnonzero(sb.normals()[:, 2] > 0.9))
    master = st.subset(np.flatnonzero(st.normals()[:, 2] < -0.9))
    master.vertex_map = master.vertex_map + bottom.n_vertices
    x = np.vstack([bottom.vertices, top.vertices])
    # a gentle bump so that gaps vary over the interface
    x[bottom.n_vertices:, 2] -= 4e-4 * np.sin(np.pi * x[bottom.n_vertices:, 0]) ** 2
    # barrier is silent where it was sampled: evaluate after pressing the top down
    pressed = x.copy()
    pressed[bottom.n_vertices:, 2] -= 5e-5
    return slave, master, x, pressed


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--divisions", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    params = BarrierParams(kappa=1e6, eps_max=1e-3)
    slave, master, x, pressed = interface(args.divisions)
    pairs = build_candidate_pairs(slave, master, params.radius, x)
    saved = _kernels.backend
    results = {}
    try:
        for name in _kernels.available_backends():
            _kernels.backend = _kernels.get_backend(name)
            t_build, state = best_of(lambda: build_contact_state(pairs, x, params), args.repeat)
            t_asm, (E, grad, H) = best_of(lambda: contact_energy_grad_hess(state, pressed), args.repeat)
            active = int(np.sum(state.gaps(pressed) < state.eps))
            results[name] = (t_build, t_asm, len(state), E, grad, H, active)
    finally:
        _kernels.backend = saved
    print(f"interface: {len(pairs.face_pairs)} face pairs, {len(pairs.edge_pairs)} edge pairs, "
          f"{len(pairs.point_pairs)} point pairs")
    print(f"{'backend':10s} {'samples':>8s} {'active':>7s} {'build [s]':>10s} {'assemble [s]':>13s}")
    for name, (tb, ta, n, _e, _g, _h, act) in results.items():
        print(f"{name:10s} {n:8d} {act:7d} {tb:10.4f} {ta:13.4f}")
    if len(results) == 2:
        c, p = results["compiled"], results["python"]
        print(f"speed-up: build x{p[0] / c[0]:.1f}, assemble x{p[1] / c[1]:.1f}")
        d_e = abs(c[3] - p[3]) / max(abs(p[3]), 1e-300)
        d_g = np.abs(c[4] - p[4]).max() / max(np.abs(p[4]).max(), 1e-300)
        d_h = abs(c[5] - p[5]).max() / max(abs(p[5]).max(), 1e-300)
        print(f"max relative difference: energy {d_e:.1e}, gradient {d_g:.1e}, hessian {d_h:.1e}")


if __name__ == "__main__":
    main()
