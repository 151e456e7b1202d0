"""Bergman-metric algebra for a single polarization.

A point of the level-k metric space is a positive-definite Hermitian Gram
matrix in the fixed monomial basis; orthonormal frames exist only transiently
through Cholesky factors. In torus-invariant mode every Gram that appears is
exactly diagonal (angular integrals of distinct monomials vanish identically),
so the diagonal is stored as a real vector and all operations stay O(D).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NormalizationFailure, QuadratureFailure, SingularGram


@dataclass(frozen=True)
class GramForm:
    """Hermitian positive-definite form on the degree-(d_i k) section space.

    Exactly one of `diag` (torus mode, positive real vector) and `mat`
    (general mode, Hermitian complex matrix) is set.
    """

    basis_tag: str
    dim: int
    diag: np.ndarray | None = None
    mat: np.ndarray | None = None

    def __post_init__(self):
        if (self.diag is None) == (self.mat is None):
            raise ValueError("exactly one of diag/mat must be given")
        if self.mat is not None and not np.array_equal(self.mat, self.mat.conj().T):
            raise ValueError("Gram storage must be exactly Hermitian")

    @property
    def is_diagonal(self) -> bool:
        return self.diag is not None

    def chol(self) -> np.ndarray:
        """Cholesky factor (vector of square roots in diagonal mode)."""
        if self.diag is not None:
            if np.any(self.diag <= 0) or not np.all(np.isfinite(self.diag)):
                raise SingularGram(f"diagonal Gram not positive: min {self.diag.min()}")
            return np.sqrt(self.diag)
        try:
            return np.linalg.cholesky(self.mat)
        except np.linalg.LinAlgError as exc:
            raise SingularGram(f"Cholesky failed: {exc}") from exc

    def scaled(self, c: float) -> "GramForm":
        if c <= 0:
            raise SingularGram(f"scale factor must be positive, got {c}")
        if self.diag is not None:
            return GramForm(self.basis_tag, self.dim, diag=self.diag * c)
        return GramForm(self.basis_tag, self.dim, mat=hermitize(self.mat * c))

    def to_json_dict(self) -> dict:
        if self.diag is not None:
            return {"basis_tag": self.basis_tag, "dim": self.dim,
                    "entries": self.diag.tolist()}
        flat = [[float(z.real), float(z.imag)] for z in self.mat.ravel()]
        return {"basis_tag": self.basis_tag, "dim": self.dim, "entries": flat}

    @staticmethod
    def from_json_dict(d: dict) -> "GramForm":
        entries = d["entries"]
        dim = int(d["dim"])
        if entries and isinstance(entries[0], list):
            mat = np.array([complex(re, im) for re, im in entries]).reshape(dim, dim)
            return GramForm(d["basis_tag"], dim, mat=hermitize(mat))
        return GramForm(d["basis_tag"], dim, diag=np.asarray(entries, dtype=float))


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2.0


def gram_from_matrix(tag: str, mat: np.ndarray) -> GramForm:
    return GramForm(tag, mat.shape[0], mat=hermitize(np.asarray(mat, dtype=complex)))


def bergman_sum(gram: GramForm, grid, i: int) -> np.ndarray:
    """Pointwise Bergman sum beta(x) = v(x)^* G^{-1} v(x), with v the vector
    of monomial section values in the reference fiber norm.

    Independent of any orthonormal-frame choice; equals the sum of squared
    fiber norms of a G-orthonormal basis of sections.
    """
    if gram.is_diagonal:
        inv = 1.0 / gram.diag
        if np.any(~np.isfinite(inv)) or np.any(gram.diag <= 0):
            raise SingularGram("diagonal Gram not positive definite")
        return grid.norm_sq[i] @ inv
    low = gram.chol()
    # columns of X are L^{-1} v(x); beta = |X|^2 summed
    x = np.linalg.solve(low, grid.sect[i].T)
    return np.sum(np.abs(x) ** 2, axis=0)


def fs_potential(gram: GramForm, grid, i: int) -> np.ndarray:
    """Fubini-Study potential (1/k) log(beta / D) of a Gram form."""
    beta = bergman_sum(gram, grid, i)
    return np.log(beta / gram.dim) / grid.spec.k


def hilb(phi: np.ndarray, nu: np.ndarray, grid, i: int) -> GramForm:
    """L^2 Gram form of the monomial basis under weight e^{-k phi} and measure nu.

    `nu` is a probability density w.r.t. dt; deviation of its mass from one
    beyond the grid tolerance is rejected rather than renormalized.
    """
    mass = grid.integrate(nu)
    if not np.isfinite(mass) or abs(mass - 1.0) > 100 * grid.tol_quad:
        raise NormalizationFailure(f"hilb measure has mass {mass!r}, expected 1")
    k = grid.spec.k
    dens = grid.w * np.exp(-k * phi) * nu
    tag = grid.bases[i].tag
    if grid.sect is None:
        diag = grid.norm_sq[i].T @ dens
        if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
            raise QuadratureFailure("hilb produced a non-positive diagonal Gram")
        return GramForm(tag, grid.bases[i].dim, diag=diag)
    v = grid.sect[i]
    mat = hermitize((v.conj() * dens[:, None]).T @ v)
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise QuadratureFailure("hilb produced a non-positive-definite Gram") from exc
    return GramForm(tag, grid.bases[i].dim, mat=mat)


def reference_gram(spec, i: int, grid) -> GramForm:
    """Gram of the monomial basis at potential 0 and measure MA(0).

    On these testbeds MA(0) coincides with the theta0 probability volume
    (all references are multiples of the same Fubini-Study form).
    """
    return hilb(np.zeros(grid.n_nodes), grid.theta0, grid, i)


def moment_image(gram: GramForm, t_gram: GramForm):
    """D * Mbar expressed in a G-orthonormal frame, via the Hilb identity
    D*Mbar = L^{-1} Hilb(FS(G), nu) L^{-*} with T = Hilb(FS(G), nu).

    Returns a vector (torus mode) or Hermitian matrix (general mode).
    """
    if gram.is_diagonal:
        return t_gram.diag / gram.diag
    low = gram.chol()
    x = np.linalg.solve(low, t_gram.mat)
    y = np.linalg.solve(low.conj(), x.T.conj()).T.conj()
    return hermitize(y)


def moment_bar(gram: GramForm, nu: np.ndarray, grid, i: int):
    """Averaged moment matrix Mbar_nu(H) in an H-orthonormal frame."""
    t_gram = hilb(fs_potential(gram, grid, i), nu, grid, i)
    img = moment_image(gram, t_gram)
    return img / gram.dim


def dist(g1: GramForm, g2: GramForm, k: int) -> float:
    """Geodesic distance under <A,B>_H = Tr(AB)/(k^2 D)."""
    if g1.dim != g2.dim:
        raise ValueError("Gram dimensions differ")
    if g1.is_diagonal and g2.is_diagonal:
        logs = np.log(g2.diag) - np.log(g1.diag)
    else:
        m1 = np.diag(g1.diag.astype(complex)) if g1.is_diagonal else g1.mat
        m2 = np.diag(g2.diag.astype(complex)) if g2.is_diagonal else g2.mat
        low = GramForm(g1.basis_tag, g1.dim, mat=hermitize(m1)).chol()
        x = np.linalg.solve(low, m2)
        rel = hermitize(np.linalg.solve(low.conj(), x.T.conj()).T.conj())
        eig = np.linalg.eigvalsh(rel)
        if np.any(eig <= 0):
            raise SingularGram("relative Gram not positive definite")
        logs = np.log(eig)
    return float(np.linalg.norm(logs) / (k * np.sqrt(g1.dim)))


def geodesic(gram: GramForm, direction, t: float) -> GramForm:
    """Bergman geodesic L exp(-tA) L^* through G = L L^*; `direction` is A in
    the G-orthonormal frame (real vector in diagonal mode, Hermitian matrix
    otherwise)."""
    if gram.is_diagonal and np.ndim(direction) == 1:
        return GramForm(gram.basis_tag, gram.dim,
                        diag=gram.diag * np.exp(-t * np.asarray(direction)))
    low = gram.chol()
    if gram.is_diagonal:
        low = np.diag(low.astype(complex))
    a = hermitize(np.asarray(direction, dtype=complex))
    eig, vec = np.linalg.eigh(a)
    expa = (vec * np.exp(-t * eig)) @ vec.conj().T
    return gram_from_matrix(gram.basis_tag, low @ expa @ low.conj().T)


def flow_step(gram: GramForm, t_gram: GramForm, hk: float) -> GramForm:
    """One geodesic Euler step of size h toward the Hilb image:
    G <- L exp(h k (L^{-1} T L^{-*} - Id)) L^*, with hk = h*k.

    Equivalently exp(-h A) with A = k(Id - D Mbar), the steepest-descent
    direction of the quantized Ding functional.
    """
    img = moment_image(gram, t_gram)
    if gram.is_diagonal:
        return GramForm(gram.basis_tag, gram.dim,
                        diag=gram.diag * np.exp(hk * (img - 1.0)))
    low = gram.chol()
    a = hermitize(img - np.eye(gram.dim))
    eig, vec = np.linalg.eigh(a)
    expa = (vec * np.exp(hk * eig)) @ vec.conj().T
    return gram_from_matrix(gram.basis_tag, low @ expa @ low.conj().T)
