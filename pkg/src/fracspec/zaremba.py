"""Mixed-problem spectral objects: the Krein term M and its checks.

The resolvent difference M between the mixed (Robin on Sigma+, Dirichlet
on Sigma-) and the all-Dirichlet realizations is assembled through
Schur-complement algebra, never by subtracting two dense inverses: with
K = -A_II^{-1} A_IB and S = A_BB - A_BI A_II^{-1} A_IB over the free
boundary nodes B = Sigma+,

    M = [K; I] S^{-1} [K; I]^T,

whose nonzero spectrum equals that of S^{-1}(K^T K + I) exactly.  The
module also carries the interior-weighted spectra used for asymptotic
comparisons, the flat-strip probe measuring the DtN principal symbol
against -kappa0, and a Fourier fast path for disk interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .discretize import DENSE_POWER_CAP, Grid, OperatorMatrix, assemble_second_order
from .eig import min_eigenvalue_estimate
from .errors import ConfigurationError, NotPositiveError, NumericError
from .symbols import SecondOrderCoeffs, boundary_reduction, dtn_principal


# ---------------------------------------------------------------------------
# Krein assembly
# ---------------------------------------------------------------------------


class KreinAssembly:
    """Schur-factorized resolvent difference for one mixed assembly.

    Holds the Dirichlet block A_gamma, the mixed matrix, the extension
    map K, the algebraic interface Schur complement S (the unweighted
    L), its boundary-weighted counterpart, and the interior mass P1 =
    K^T W_I K.  M itself is materialized lazily and only below the
    dense-size cap.
    """

    def __init__(self, A_II, A_IB, A_BB, h: float, n: int, shift: float,
                 boundary_weights=None, interior_weights=None, meta=None,
                 form_units: bool = False):
        nI = A_II.shape[0]
        nB = A_IB.shape[1] if A_IB is not None else 0
        self.h = float(h)
        self.n = int(n)
        self.shift = float(shift)
        self.meta = dict(meta or {})
        self.meta.setdefault("shift", self.shift)
        self.meta["n2_flagged"] = self.n == 2
        self.n_interior = nI
        self.n_boundary = nB

        if interior_weights is None:
            interior_weights = np.full(nI, self.h**self.n)
        self.interior_weights = np.asarray(interior_weights, dtype=float)
        if boundary_weights is None:
            boundary_weights = np.full(nB, self.h ** (self.n - 1))
        self.boundary_weights = np.asarray(boundary_weights, dtype=float)

        self._A_II = A_II
        if nB == 0:
            self.K = np.zeros((nI, 0))
            self.S = np.zeros((0, 0))
        else:
            A_IB = np.asarray(A_IB, dtype=float)
            A_BB = np.asarray(A_BB, dtype=float)
            if sp.issparse(A_II):
                import scipy.sparse.linalg as spla

                try:
                    lu = spla.splu(A_II.tocsc())
                except RuntimeError as exc:
                    raise NumericError(f"interior block not invertible: {exc}") from exc
                self.K = -lu.solve(A_IB)
            else:
                try:
                    self.K = -scipy.linalg.solve(np.asarray(A_II, dtype=float), A_IB, assume_a="sym")
                except scipy.linalg.LinAlgError as exc:
                    raise NumericError(f"interior block not invertible: {exc}") from exc
            S = A_BB + A_IB.T @ self.K
            self.S = 0.5 * (S + S.T)
            w = scipy.linalg.eigvalsh(self.S)
            if w.min() <= 0.0:
                raise NotPositiveError(
                    "interface Schur complement is not positive definite; apply a larger positivity shift"
                )
        # weighted spectra live in quadratic-form units; box assemblies carry
        # the 1/h^n operator normalization that must be undone first
        self.S_form = self.S if form_units else (self.h**self.n) * self.S
        root = 1.0 / np.sqrt(self.boundary_weights) if nB else np.ones(0)
        self.L_weighted = root[:, None] * self.S_form * root[None, :] if nB else np.zeros((0, 0))
        self.P1 = (self.K * self.interior_weights[:, None]).T @ self.K if nB else np.zeros((0, 0))
        self._M = None

    # -- matrices ----------------------------------------------------------

    @property
    def A_gamma(self) -> OperatorMatrix:
        return OperatorMatrix(self._A_II, "interior", descriptor="Dirichlet block", meta={"h": self.h})

    @property
    def M(self) -> np.ndarray:
        """The resolvent-difference matrix on interior + Sigma+ nodes."""
        if self._M is None:
            size = self.n_interior + self.n_boundary
            if self.n_boundary == 0:
                self._M = np.zeros((size, size))
            else:
                if size > DENSE_POWER_CAP:
                    raise NumericError(f"M would be {size}x{size}, above the {DENSE_POWER_CAP} cap")
                G = np.vstack([self.K, np.eye(self.n_boundary)])
                X = scipy.linalg.solve(self.S, G.T, assume_a="pos")
                M = G @ X
                self._M = 0.5 * (M + M.T)
        return self._M

    # -- spectra -----------------------------------------------------------

    def _congruence_eigs(self, inner: np.ndarray) -> np.ndarray:
        """Descending eigenvalues of S_like^{-1} inner via S^{-1/2} similarity."""
        if self.n_boundary == 0:
            return np.zeros(0)
        w, V = scipy.linalg.eigh(self.S)
        root = (V / np.sqrt(w)) @ V.T
        G = root @ inner @ root
        vals = scipy.linalg.eigvalsh(0.5 * (G + G.T))
        return vals[::-1]

    def mu_exact(self) -> np.ndarray:
        """Nonzero spectrum of M through the algebraic identity side."""
        return self._congruence_eigs(self.K.T @ self.K + np.eye(self.n_boundary))

    def mu_from_M(self) -> np.ndarray:
        """Top eigenvalues of the materialized M (independent route)."""
        if self.n_boundary == 0:
            return np.zeros(0)
        vals = scipy.linalg.eigvalsh(self.M)
        return vals[::-1][: self.n_boundary]

    def weighted_mu(self, include_boundary_mass: bool = False,
                    half_cell: bool = False) -> np.ndarray:
        """Descending spectrum of S_form^{-1} K^T W_I K.

        The continuum-consistent mu_j: interface form against the
        interior L2 mass of the extension.  The boundary trace mass
        (diag of Sigma+ weights) is an O(h) discrete artifact and is
        excluded by default; the exact algebraic identity keeps it.

        half_cell adds the volume quadrature contribution of the free
        boundary nodes themselves (surface weight times h/2).  The
        extension equals the boundary data there, so this is the
        trapezoid end correction of the same interior mass integral;
        it sharpens the constant in ordered-eigenvalue fits on coarse
        grids where the default one-sided sum underweights slowly
        decaying extensions.
        """
        if self.n_boundary == 0:
            return np.zeros(0)
        inner = self.P1.copy()
        if half_cell:
            inner[np.diag_indices_from(inner)] += 0.5 * self.h * self.boundary_weights
        if include_boundary_mass:
            inner[np.diag_indices_from(inner)] += self.boundary_weights
        w, V = scipy.linalg.eigh(self.S_form)
        root = (V / np.sqrt(w)) @ V.T
        G = root @ inner @ root
        return scipy.linalg.eigvalsh(0.5 * (G + G.T))[::-1]

    def weighted_L_spectrum(self) -> np.ndarray:
        """Ascending spectrum of the boundary-weighted interface operator."""
        if self.n_boundary == 0:
            return np.zeros(0)
        return scipy.linalg.eigvalsh(self.L_weighted)

    def weighted_L_eigenpairs(self):
        vals = scipy.linalg.eigh(self.L_weighted)
        return vals

    def record(self) -> dict:
        return {
            "n_interior": self.n_interior,
            "n_boundary": self.n_boundary,
            "h": self.h,
            "dim": self.n,
            "shift": self.shift,
            "n2_flagged": self.meta["n2_flagged"],
        }


def krein_from_matrix(A_full: OperatorMatrix, shift: float = 0.0,
                      boundary_weights=None, interior_weights=None) -> KreinAssembly:
    """Krein assembly from a matrix carrying interior/sigma_plus row sets.

    shift is added to the diagonal (identity mass) before factorization;
    grid-based callers should fold the shift into the zero-order term at
    assembly time instead, which uses the true node volumes.
    """
    I = np.asarray(A_full.rows("interior"), dtype=int)
    B = np.asarray(A_full.rows("sigma_plus"), dtype=int)
    mat = A_full.matrix
    if shift:
        mat = mat + shift * (sp.identity(mat.shape[0], format="csr") if sp.issparse(mat) else np.eye(mat.shape[0]))
    if sp.issparse(mat):
        A_II = mat[I][:, I]
        A_IB = mat[I][:, B].toarray()
        A_BB = mat[B][:, B].toarray()
    else:
        A_II = mat[np.ix_(I, I)]
        A_IB = mat[np.ix_(I, B)]
        A_BB = mat[np.ix_(B, B)]
    grid = A_full.grid
    h = A_full.meta.get("h", grid.h if grid is not None else 1.0)
    n = grid.n if grid is not None else 1
    return KreinAssembly(A_II, A_IB, A_BB, h, n, shift,
                         boundary_weights=boundary_weights, interior_weights=interior_weights,
                         meta={"descriptor": A_full.descriptor},
                         form_units=A_full.meta.get("units") == "form")


def krein_term(coeffs: SecondOrderCoeffs, sigma, grid: Grid, partition=None,
               shift="auto") -> KreinAssembly:
    """Assemble the mixed realization on the grid and factor its Krein term.

    partition optionally selects a subset of the grid's Sigma+ node ids
    as the free boundary set; unselected Sigma+ nodes are eliminated as
    Dirichlet.  shift="auto" applies 1 + max(0, -2 min-eigenvalue
    estimate), folded into the zero-order term so the mass is the true
    node volume; it is recorded in the assembly.
    """
    probe = assemble_second_order(coeffs, grid, bc="mixed", sigma=sigma)
    if shift == "auto":
        est = float(min_eigenvalue_estimate(probe.matrix)) if probe.shape[0] else 1.0
        shift_val = 1.0 + max(0.0, -2.0 * est)
    else:
        shift_val = float(shift)
    A = assemble_second_order(coeffs, grid, bc="mixed", sigma=sigma, a0=shift_val) if shift_val else probe

    I = A.rows("interior")
    B_all = A.rows("sigma_plus")
    node_ids = np.asarray(A.meta["node_ids"])
    if partition is None:
        B = B_all
    else:
        wanted = set(int(p) for p in np.asarray(partition).ravel())
        B = np.array([r for r in B_all if int(node_ids[r]) in wanted], dtype=int)
        if len(B) != len(wanted):
            raise ConfigurationError("partition contains nodes outside the grid's sigma_plus set")
    mat = A.matrix
    A_II = mat[I][:, I]
    A_IB = mat[I][:, B].toarray() if B.size else None
    A_BB = mat[B][:, B].toarray() if B.size else None
    return KreinAssembly(A_II, A_IB, A_BB, grid.h, grid.n, shift_val,
                         meta={"descriptor": A.descriptor, "sigma": A.meta.get("sigma")})


@dataclass(frozen=True)
class KreinIdentityReport:
    max_rel_mismatch: float
    mu_from_m: np.ndarray
    mu_identity: np.ndarray
    rank_bound_ok: bool

    def record(self) -> dict:
        return {
            "max_rel_mismatch": self.max_rel_mismatch,
            "count": int(self.mu_identity.size),
            "rank_bound_ok": self.rank_bound_ok,
        }


def krein_identity_check(k: KreinAssembly) -> KreinIdentityReport:
    """Compare the two independent routes to the nonzero spectrum of M.

    Left side: dense eigenvalues of the materialized M.  Right side: the
    spectrum of S^{-1}(K^T K + I) through a symmetric congruence.  The
    agreement is an exact finite-dimensional matrix identity, so the
    expected mismatch is pure roundoff.
    """
    mu_m = k.mu_from_M()
    mu_id = k.mu_exact()
    if mu_id.size == 0:
        return KreinIdentityReport(0.0, mu_m, mu_id, True)
    scale = np.abs(mu_id).max()
    mismatch = float(np.abs(mu_m - mu_id).max() / scale)
    all_m = scipy.linalg.eigvalsh(k.M)
    rank = int(np.sum(np.abs(all_m) > 1e-12 * max(scale, 1.0)))
    psd_ok = all_m.min() >= -1e-12 * max(scale, 1.0)
    return KreinIdentityReport(mismatch, mu_m, mu_id, bool(rank <= k.n_boundary and psd_ok))


# ---------------------------------------------------------------------------
# flat-strip DtN symbol probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DtnProbeReport:
    xi: np.ndarray
    measured: np.ndarray
    predicted: np.ndarray
    rel_errors: np.ndarray
    meta: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "xi": list(map(float, self.xi)),
            "measured": list(map(float, self.measured)),
            "predicted": list(map(float, self.predicted)),
            "rel_errors": list(map(float, self.rel_errors)),
            **self.meta,
        }


def _mode_schur(coeffs_mat: np.ndarray, xi: float, h: float, n_rows: int) -> float:
    """Scalar Schur complement of the per-mode boundary-normal chain.

    Rows j = 0..n_rows-1 discretize the inward normal; the top row
    carries a Dirichlet condition (eliminated), the bottom row j = 0 is
    the free boundary node with half tangential weight.  Returns the
    form-unit interface energy of the mode.
    """
    a11 = coeffs_mat[0, 0]
    a22 = coeffs_mat[1, 1]
    a12 = coeffs_mat[0, 1]
    mxi = 2.0 - 2.0 * np.cos(xi * h)
    sxi = np.sin(xi * h)
    diag = np.full(n_rows, a11 * mxi + 2.0 * a22, dtype=complex)
    diag[0] = 0.5 * a11 * mxi + a22
    off_up = np.full(n_rows - 1, -a22 - 1j * a12 * sxi, dtype=complex)  # T[j, j+1]
    # banded solve of T[1:, 1:] x = T[1:, 0]
    ab = np.zeros((3, n_rows - 1), dtype=complex)
    ab[0, 1:] = off_up[1:]
    ab[1, :] = diag[1:]
    ab[2, :-1] = np.conj(off_up[1:])
    rhs = np.zeros(n_rows - 1, dtype=complex)
    rhs[0] = np.conj(off_up[0])  # T[1, 0]
    x = scipy.linalg.solve_banded((1, 1), ab, rhs)
    s = diag[0] - off_up[0] * x[0]
    if abs(s.imag) > 1e-10 * abs(s):
        raise NumericError("mode reduction lost Hermitian symmetry")
    return float(s.real)


def dtn_symbol_probe(coeffs: SecondOrderCoeffs, xi_primes, h: float = 1.0 / 128.0,
                     period: float = 2.0 * np.pi, height: float | None = None) -> DtnProbeReport:
    """Measure the DtN principal symbol on a flat strip against -kappa0.

    The strip is periodic in the tangential direction (length `period`)
    and extends far enough into the normal direction that the Dirichlet
    truncation error sits below roundoff (decay rate read off the
    factorization roots).  Each admissible tangential frequency xi is an
    exact eigenvector of the weighted interface operator, so the
    Rayleigh quotient is the per-mode scalar Schur complement.
    """
    if coeffs.n != 2:
        raise ConfigurationError("the strip probe is two-dimensional")
    if not coeffs.constant:
        raise ConfigurationError("the strip probe needs constant coefficients")
    xi_arr = np.atleast_1d(np.asarray(xi_primes, dtype=float))
    if xi_arr.size == 0 or np.any(xi_arr == 0.0):
        raise ConfigurationError("tangential frequencies must be nonzero")
    ratio = xi_arr * period / (2.0 * np.pi)
    if np.any(np.abs(ratio - np.round(ratio)) > 1e-9):
        raise ConfigurationError("tangential frequency incommensurate with the strip period")

    frame = np.eye(2)  # tangent e1, inward normal e2
    predicted = np.array([float(dtn_principal(coeffs, (0.0, 0.0), frame, (xi,))) for xi in xi_arr])
    # truncation height from the decay rate Re kappa_plus of the inward solution
    rates = [boundary_reduction(coeffs, (0.0, 0.0), frame, (xi,)).kappa_plus.real for xi in xi_arr]
    rate = min(rates)
    H = height if height is not None else 14.0 / rate
    n_rows = int(np.ceil(H / h))
    if n_rows > 200000:
        raise ConfigurationError("strip too tall for the requested spacing")

    a = np.asarray(coeffs.a, dtype=float)
    measured = np.array([-_mode_schur(a, xi, h, n_rows) / h for xi in xi_arr])
    rel = np.abs(measured - predicted) / np.abs(predicted)
    meta = {"h": h, "period": period, "height": float(n_rows * h), "rows": n_rows}
    return DtnProbeReport(xi_arr, measured, predicted, rel, meta)


# ---------------------------------------------------------------------------
# disk interface fast path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskSpectra:
    """Interface spectra on a disk with a circular-arc free boundary.

    mu: descending interior-weighted Krein spectrum, eig(S^-1 K^T W K).
    L_weighted: arc-weighted interface Schur matrix over Sigma+ nodes.
    arc_distances: geodesic distance of each Sigma+ node to the nearest
    arc endpoint.  s_modes/q_modes: the per-mode scalar reductions the
    full-circle matrices were synthesized from.
    """

    mu: np.ndarray
    L_weighted: np.ndarray
    S_plus: np.ndarray
    Q_plus: np.ndarray
    arc_distances: np.ndarray
    s_modes: np.ndarray
    q_modes: np.ndarray
    meta: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {"count": int(self.mu.size), **self.meta}


def _radial_mode_reduction(n_r: int, n_theta: int, radius: float, shift: float, m: int):
    """Scalar Schur s_m and extension mass q_m of one angular mode.

    The mode-m energy restricted to one radial chain: nodes j = 1..n_r-1
    are interior rings, j = n_r the boundary ring (value prescribed), and
    the center joins the m = 0 chain only.  Returns (s_m, q_m) in form
    units per boundary node.
    """
    dr = radius / n_r
    dth = 2.0 * np.pi / n_theta
    mang = 2.0 - 2.0 * np.cos(m * dth)
    r = dr * np.arange(1, n_r + 1)

    # radial edge weights between rings j and j+1 (midpoint radius)
    w_rad = (r[:-1] + 0.5 * dr) * dth / dr
    # angular edge weight at ring j, halved on the boundary ring
    w_ang = dr / (r * dth)
    w_ang[-1] *= 0.5
    # node volumes: r_j dr dth, halved on the boundary ring
    vol = r * dr * dth
    vol[-1] *= 0.5

    with_center = m == 0
    n_int = (n_r - 1) + (1 if with_center else 0)  # unknowns per chain
    diag = np.zeros(n_int)
    off = np.zeros(max(n_int - 1, 0))
    # layout: [center?] ring1 .. ring_{n_r-1}
    base = 1 if with_center else 0
    for j in range(n_r - 1):  # rings 1..n_r-1 at positions base+j
        pos = base + j
        diag[pos] += w_ang[j] * mang + shift * vol[j]
        if j + 1 < n_r - 1:
            diag[pos] += w_rad[j]
            diag[base + j + 1] += w_rad[j]
            off[pos] = -w_rad[j]
        else:
            diag[pos] += w_rad[j]  # edge to the boundary ring
    # center-ring1 edges, weight dth/2 per sector: the ring-1 diagonal sees
    # that stiffness in every mode; the center unknown joins mode 0 only,
    # with per-mode volume W_center / n_theta
    diag[base] += dth / 2.0
    if with_center:
        diag[0] += dth / 2.0 + shift * (np.pi * (dr / 2.0) ** 2) / n_theta
        off[0] = -dth / 2.0
    # boundary node diagonal: its angular edges + the last radial edge + mass
    s_diag = w_ang[-1] * mang + w_rad[-1] + shift * vol[-1]

    ab = np.zeros((3, n_int))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    rhs = np.zeros(n_int)
    rhs[-1] = w_rad[-1]  # coupling of ring n_r-1 to the boundary value 1
    u = scipy.linalg.solve_banded((1, 1), ab, rhs)
    s_m = s_diag - w_rad[-1] * u[-1]

    vols = np.concatenate(([np.pi * (dr / 2.0) ** 2 / n_theta], vol[: n_r - 1])) if with_center else vol[: n_r - 1]
    q_m = float(vols @ u**2)
    return float(s_m), q_m


def disk_interface_spectra(n_r: int, n_theta: int, arc=(0.0, np.pi), radius: float = 1.0,
                           shift: float = 1.0, sigma: float = 0.0) -> DiskSpectra:
    """Krein and interface spectra for a disk whose free boundary is an arc.

    Separation of variables turns the full-circle Schur complement and
    the extension mass K^T W K into circulants synthesized from per-mode
    scalar chains, so no dense interior solve is ever formed.  Dropping
    the complement of the arc (Dirichlet elimination) is exactly taking
    the arc submatrices, which is where the mixed problem and its arc
    geometry enter.
    """
    if n_r < 4 or n_theta < 8:
        raise ConfigurationError("disk resolution too small to resolve the interface")
    th0, th1 = float(arc[0]), float(arc[1])
    if not 0.0 <= th0 < th1 <= 2.0 * np.pi:
        raise ConfigurationError("arc endpoints must satisfy 0 <= a < b <= 2 pi")

    half = n_theta // 2
    s_half = np.zeros(half + 1)
    q_half = np.zeros(half + 1)
    for m in range(half + 1):
        s_half[m], q_half[m] = _radial_mode_reduction(n_r, n_theta, radius, shift, m)
    s_modes = np.concatenate([s_half, s_half[1 : n_theta - half][::-1]])
    q_modes = np.concatenate([q_half, q_half[1 : n_theta - half][::-1]])

    row_s = np.fft.ifft(s_modes).real
    row_q = np.fft.ifft(q_modes).real
    S_full = scipy.linalg.circulant(row_s)
    Q_full = scipy.linalg.circulant(row_q)

    dth = 2.0 * np.pi / n_theta
    thetas = dth * np.arange(n_theta)
    snap = 1e-9 * dth
    on_arc = (thetas > th0 + snap) & (thetas < th1 - snap)  # relative interior
    sel = np.flatnonzero(on_arc)
    if sel.size == 0:
        raise ConfigurationError("arc contains no boundary nodes at this resolution")
    S_plus = S_full[np.ix_(sel, sel)]
    Q_plus = Q_full[np.ix_(sel, sel)]

    arc_w = radius * dth
    if sigma:
        # a Robin term only touches the retained boundary diagonal, which
        # commutes with the interior elimination, so adding it here is exact
        S_plus = S_plus + sigma * arc_w * np.eye(sel.size)

    w = scipy.linalg.eigvalsh(S_plus)
    if w.min() <= 0.0:
        raise NotPositiveError("arc Schur complement not positive definite; increase the shift")
    mu = scipy.linalg.eigh(Q_plus, S_plus, eigvals_only=True)[::-1]

    L_weighted = S_plus / arc_w
    d_lo = radius * (thetas[sel] - th0)
    d_hi = radius * (th1 - thetas[sel])
    arc_distances = np.minimum(d_lo, d_hi)

    meta = {
        "n_r": n_r,
        "n_theta": n_theta,
        "radius": radius,
        "arc": (th0, th1),
        "shift": shift,
        "sigma": sigma,
        "dr": radius / n_r,
        "arc_weight": arc_w,
        "n2_flagged": True,
    }
    return DiskSpectra(np.asarray(mu), L_weighted, S_plus, Q_plus, arc_distances, s_modes, q_modes, meta)
