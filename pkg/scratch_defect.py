import time
import numpy as np
import scipy.linalg as sla

from lovebem import formulations, sources
from lovebem.mesh import generate_sphere
from lovebem.operators import SurfaceSpaces

K5 = 2.0 * np.pi * 5e9 / 2.99792458e8


def masses(spaces):
    mesh, rwg = spaces.mesh, spaces.rwg
    _, w2, v2 = sources._slot_values(mesh, rwg.tri_signs, 2)
    local = np.einsum("tp,tpid,tpjd->tij", w2, v2, v2)
    m1 = np.zeros((mesh.n_edges, mesh.n_edges))
    for a in range(3):
        for b in range(3):
            np.add.at(m1, (mesh.tri_edges[:, a], mesh.tri_edges[:, b]), local[:, a, b])
    fine, micro = spaces.fine, spaces.micro
    _, wf, vf = sources._slot_values(fine, micro.tri_signs, 2)
    localf = np.einsum("tp,tpid,tpjd->tij", wf, vf, vf)
    gf = np.zeros((fine.n_edges, fine.n_edges))
    for a in range(3):
        for b in range(3):
            np.add.at(gf, (fine.tri_edges[:, a], fine.tri_edges[:, b]), localf[:, a, b])
    B = np.asarray(spaces.B.todense())
    return m1, B.T @ gf @ B


def defects(suite, spaces):
    P = formulations.build_calderon(suite)
    m1, m2 = masses(spaces)
    n = spaces.n_edges
    plain = np.linalg.norm(P @ P - P, 2) / np.linalg.norm(P, 2)
    l1 = sla.cholesky(m1, lower=False)      # upper: m = l1.T @ l1? scipy returns U with m = U.T U for lower=False
    l2 = sla.cholesky(m2, lower=False)
    W = sla.block_diag(l1, l2)
    Winv = sla.solve_triangular(W, np.eye(2 * n))
    PW = W @ P @ Winv
    weighted = np.linalg.norm(PW @ PW - PW, 2) / np.linalg.norm(PW, 2)
    return P, plain, weighted


def fit_dual(spaces, spec):
    fine, micro = spaces.fine, spaces.micro
    _, w2, v2 = sources._slot_values(fine, micro.tri_signs, 2)
    local = np.einsum("tp,tpid,tpjd->tij", w2, v2, v2)
    gf = np.zeros((fine.n_edges, fine.n_edges))
    for a in range(3):
        for b in range(3):
            np.add.at(gf, (fine.tri_edges[:, a], fine.tri_edges[:, b]), local[:, a, b])
    pts, w, vals = sources._slot_values(fine, micro.tri_signs, 7)
    e_f, h_f = sources.dipole_fields(spec, pts.reshape(-1, 3))
    e_f = e_f.reshape(fine.n_triangles, -1, 3)
    h_f = h_f.reshape(fine.n_triangles, -1, 3)
    normal = fine.normals[:, None, :]
    B = np.asarray(spaces.B.todense())
    out = []
    for trace in (np.cross(normal, e_f), spec.eta * np.cross(normal, h_f)):
        load = np.einsum("tp,tpid,tpd->ti", w, vals, trace)
        rhs = np.zeros(fine.n_edges, dtype=np.complex128)
        for a in range(3):
            np.add.at(rhs, fine.tri_edges[:, a], load[:, a])
        out.append(sla.solve(B.T @ gf @ B, B.T @ rhs))
    return out


spec = sources.DipoleSpec([0.008, 0, 0], [0, 0, 1.0], 5e9)
for sub in (1, 2):
    t0 = time.time()
    spaces = SurfaceSpaces(generate_sphere(0.04, sub))
    suite = formulations.OperatorSuite(spaces, None, K5)
    P, plain, weighted = defects(suite, spaces)
    mag, _ = sources.trace_currents(spec, spaces)
    _, j_dual = fit_dual(spaces, spec)
    pair = np.concatenate([mag.coefficients, j_dual])
    fixed = np.linalg.norm(P @ pair - pair) / np.linalg.norm(pair)
    print(f"sub-{sub}: plain {plain:.5f}  weighted {weighted:.5f}  "
          f"love-fixed {fixed:.5f}  ({time.time()-t0:.0f}s)", flush=True)
