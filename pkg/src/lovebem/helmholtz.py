"""Loop-star splitting and frequency scaling for edge-element coefficient spaces.

On a closed, oriented, genus-zero surface the space of edge-function
coefficients splits into a solenoidal part spanned by vertex loops and a
complementary part spanned by cell stars.  This module builds the integer
star and loop transformation matrices, the four orthogonal projectors
derived from their ranges, and the projector-weighted wavenumber scalings
used to keep the reconstruction systems well conditioned at low frequency.

Conventions.  An edge is stored as a sorted vertex pair (v, w) with v < w,
and its plus cell is the incident triangle with the lower index.  The star
column of a cell carries +1 on edges whose plus cell it is and -1 on edges
whose minus cell it is.  The loop column of a vertex v carries, for each
edge (v, w) incident on v, the sign +1 when the plus cell traverses the
directed side v -> w in its cyclic vertex order and -1 otherwise; the
opposite endpoint receives the opposite sign.  With outward-oriented cells
this makes every loop circulate the same way seen from outside, and the
identity Lambda^T Sigma = 0 holds in exact integer arithmetic.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import RankError, TopologyError

# Relative eigenvalue cutoff for the pseudoinverse of the incidence Gramians.
PINV_CUTOFF = 1e-10


@dataclass
class QuasiHelmholtzSet:
    """Star/loop incidence matrices and the four derived projectors.

    P_Sigma and P_Lambda project onto the ranges of Sigma and Lambda;
    P_LambdaH = I - P_Sigma and P_SigmaH = I - P_Lambda are their exact
    complements.  On genus-zero surfaces the ranges are orthogonal
    complements of each other, so P_LambdaH and P_Lambda agree to
    projector accuracy.
    """

    Sigma: np.ndarray
    Lambda: np.ndarray
    P_Sigma: np.ndarray
    P_LambdaH: np.ndarray
    P_Lambda: np.ndarray
    P_SigmaH: np.ndarray


@dataclass
class ScalingPair:
    """Projector-weighted scalings M_rwg, M_bc at wavenumber k.

    M_rwg = P_LambdaH k^(-1/2) + i P_Sigma k^(+1/2)
    M_bc  = P_SigmaH  k^(-1/2) + i P_Lambda k^(+1/2)

    Both matrices are normal with singular values k^(-1/2) and k^(+1/2),
    and their inverses follow in closed form by swapping the exponents
    and inverting the i factor on the second term.
    """

    k: float
    M_rwg: np.ndarray
    M_bc: np.ndarray
    M_rwg_inverse: np.ndarray
    M_bc_inverse: np.ndarray


@dataclass
class CancellationReport:
    """Projected inverse-operator norms over a wavenumber sweep.

    star_to_loop_norms[i] is the spectral norm of P_Lambda A(k_i)^-1 P_Sigma
    where A = G_bc/2 + K_bc, and loop_to_star_norms[i] that of
    P_Sigma B(k_i)^-1 P_Lambda where B = -G_bc^T/2 + K_rwg.  The unprojected
    norms of A^-1 come along for scale.  Slopes are least-squares fits in
    log-log coordinates and are None when fewer than two wavenumbers were
    given (insufficient_points is then set).
    """

    ks: np.ndarray
    star_to_loop_norms: np.ndarray
    loop_to_star_norms: np.ndarray
    unprojected_norms: np.ndarray
    slope_star_to_loop: float | None
    slope_loop_to_star: float | None
    slope_unprojected: float | None
    insufficient_points: bool


def _freeze(a):
    a.flags.writeable = False
    return a


def build_sigma_lambda(mesh):
    """Build the integer star (Sigma) and loop (Lambda) matrices of a mesh.

    Returns (Sigma, Lambda) with shapes (n_edges, n_triangles) and
    (n_edges, n_vertices).  Raises TopologyError when the Euler count
    rules out genus zero, since then the two ranks cannot add up to the
    edge count and the splitting is incomplete.
    """
    if mesh.n_vertices - mesh.n_edges + mesh.n_triangles != 2:
        raise TopologyError(
            "loop-star splitting needs a genus-zero surface; Euler count "
            f"V-E+F = {mesh.n_vertices - mesh.n_edges + mesh.n_triangles}, expected 2"
        )

    n_e = mesh.n_edges
    rows = np.arange(n_e)

    sigma = np.zeros((n_e, mesh.n_triangles), dtype=np.int64)
    sigma[rows, mesh.edge_tris[:, 0]] = 1
    sigma[rows, mesh.edge_tris[:, 1]] = -1

    v, w = mesh.edges[:, 0], mesh.edges[:, 1]
    plus = mesh.triangles[mesh.edge_tris[:, 0]]
    t0, t1, t2 = plus[:, 0], plus[:, 1], plus[:, 2]
    forward = ((t0 == v) & (t1 == w)) | ((t1 == v) & (t2 == w)) | ((t2 == v) & (t0 == w))
    sign = np.where(forward, 1, -1)

    lam = np.zeros((n_e, mesh.n_vertices), dtype=np.int64)
    lam[rows, v] = sign
    lam[rows, w] = -sign
    return _freeze(sigma), _freeze(lam)


def _range_projector(mat, what):
    """Orthogonal projector onto the range of an incidence matrix.

    The Gramian mat^T mat of either incidence matrix has a one-dimensional
    nullspace spanned by the all-ones vector (add up all stars, or all
    loops, and everything cancels).  Anything else means the input was not
    a valid incidence matrix, which is reported as a RankError.
    """
    mat = np.asarray(mat, dtype=np.float64)
    gram = mat.T @ mat
    vals, vecs = np.linalg.eigh(gram)
    null = vals <= PINV_CUTOFF * vals[-1]
    n_null = int(null.sum())
    if n_null != 1:
        raise RankError(
            f"{what} Gramian has a {n_null}-dimensional nullspace, expected 1"
        )
    null_vec = vecs[:, null][:, 0]
    if abs(null_vec.sum()) < 0.99 * np.sqrt(mat.shape[1]):
        raise RankError(f"{what} Gramian nullspace is not the constant vector")

    keep = ~null
    half = mat @ (vecs[:, keep] / np.sqrt(vals[keep]))
    proj = half @ half.T
    proj = 0.5 * (proj + proj.T)
    return proj, int(keep.sum())


def build_projectors(sigma, lam):
    """Build the four projectors from the star and loop matrices."""
    p_sigma, rank_sigma = _range_projector(sigma, "star")
    p_lambda, rank_lambda = _range_projector(lam, "loop")
    if rank_sigma + rank_lambda != sigma.shape[0]:
        raise RankError(
            f"star rank {rank_sigma} and loop rank {rank_lambda} do not fill "
            f"the {sigma.shape[0]} edge dimensions"
        )
    eye = np.eye(sigma.shape[0])
    return QuasiHelmholtzSet(
        Sigma=np.asarray(sigma),
        Lambda=np.asarray(lam),
        P_Sigma=_freeze(p_sigma),
        P_LambdaH=_freeze(eye - p_sigma),
        P_Lambda=_freeze(p_lambda),
        P_SigmaH=_freeze(np.eye(sigma.shape[0]) - p_lambda),
    )


def build_scaling(qh, k):
    """Build the scaling pair M_rwg, M_bc and their closed-form inverses."""
    if not k > 0.0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    lo = k ** -0.5
    hi = k ** 0.5
    return ScalingPair(
        k=float(k),
        M_rwg=_freeze(lo * qh.P_LambdaH + 1j * hi * qh.P_Sigma),
        M_bc=_freeze(lo * qh.P_SigmaH + 1j * hi * qh.P_Lambda),
        M_rwg_inverse=_freeze(hi * qh.P_LambdaH - 1j * lo * qh.P_Sigma),
        M_bc_inverse=_freeze(hi * qh.P_SigmaH - 1j * lo * qh.P_Lambda),
    )


def fit_loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=np.float64)),
                            np.log(np.asarray(y, dtype=np.float64)), 1)[0])


def measure_cancellation(mesh, k_list, provider=None):
    """Measure how the projected inverse interaction norms scale with k.

    For each wavenumber the on-surface interaction blocks A = G_bc/2 + K_bc
    and B = -G_bc^T/2 + K_rwg are built (through `provider(k)`, which
    defaults to assembling them on `mesh`), inverted densely, and squeezed
    between the loop and star projectors.  Both projected norms collapse
    like k^2 toward low frequency while the unprojected inverse stays flat;
    the fitted slopes quantify that.
    """
    ks = np.asarray([float(k) for k in k_list], dtype=np.float64)
    if provider is None:
        from .formulations import inner_operator_blocks

        def provider(k):
            return inner_operator_blocks(mesh, k)

    sigma, lam = build_sigma_lambda(mesh)
    qh = build_projectors(sigma, lam)

    star_to_loop = np.empty(ks.size)
    loop_to_star = np.empty(ks.size)
    unprojected = np.empty(ks.size)
    for i, k in enumerate(ks):
        a_bc, b_rwg = provider(k)
        inv_a = np.linalg.inv(a_bc)
        inv_b = np.linalg.inv(b_rwg)
        star_to_loop[i] = np.linalg.norm(qh.P_Lambda @ inv_a @ qh.P_Sigma, 2)
        loop_to_star[i] = np.linalg.norm(qh.P_Sigma @ inv_b @ qh.P_Lambda, 2)
        unprojected[i] = np.linalg.norm(inv_a, 2)

    insufficient = ks.size < 2
    return CancellationReport(
        ks=ks,
        star_to_loop_norms=star_to_loop,
        loop_to_star_norms=loop_to_star,
        unprojected_norms=unprojected,
        slope_star_to_loop=None if insufficient else fit_loglog_slope(ks, star_to_loop),
        slope_loop_to_star=None if insufficient else fit_loglog_slope(ks, loop_to_star),
        slope_unprojected=None if insufficient else fit_loglog_slope(ks, unprojected),
        insufficient_points=insufficient,
    )
