"""Pointwise Lie-algebra and exterior-algebra kernel.

Lie elements are real coefficient vectors in an orthonormal basis {T_a} of
su(n), with <X, Y> = -2 tr(XY). Forms follow the layout of
``app.models.fields``: component axis first, Lie axis last.
"""

import logging
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from app.core.exceptions import DegreeError, DimensionMismatchError
from app.models.fields import FormValue, ValueKind

logger = logging.getLogger(__name__)

PAIRINGS = ("bracket", "matrix", "scalar", "scale")


@lru_cache(maxsize=None)
def multi_indices(k: int) -> Tuple[Tuple[int, ...], ...]:
    """Increasing multi-indices of length k in lexicographic order"""
    return tuple(combinations(range(4), k))


@lru_cache(maxsize=None)
def index_of(k: int) -> dict:
    return {I: i for i, I in enumerate(multi_indices(k))}


def permutation_sign(seq) -> int:
    """Parity of the permutation sorting ``seq`` (0 if it has repeats)"""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def wedge_table(k: int, l: int) -> Tuple[Tuple[int, int, int, int], ...]:
    """Entries (I, J, K, sign) with e^I ^ e^J = sign e^K"""
    table = []
    lookup = index_of(k + l)
    for i, I in enumerate(multi_indices(k)):
        for j, J in enumerate(multi_indices(l)):
            sign = permutation_sign(I + J)
            if sign:
                table.append((i, j, lookup[tuple(sorted(I + J))], sign))
    return tuple(table)


@lru_cache(maxsize=None)
def hodge_table(k: int) -> Tuple[Tuple[int, int, int], ...]:
    """Entries (I, I^c, sign) with *e^I = sign e^{I^c}"""
    lookup = index_of(4 - k)
    table = []
    for i, I in enumerate(multi_indices(k)):
        Ic = tuple(m for m in range(4) if m not in I)
        table.append((i, lookup[Ic], permutation_sign(I + Ic)))
    return tuple(table)


@lru_cache(maxsize=None)
def interior_table(k: int) -> Tuple[Tuple[int, int, int, int], ...]:
    """Entries (I, mu, I minus mu, sign) of the contraction i_{e_mu} e^I"""
    lookup = index_of(k - 1)
    table = []
    for i, I in enumerate(multi_indices(k)):
        for position, mu in enumerate(I):
            rest = I[:position] + I[position + 1:]
            table.append((i, mu, lookup[rest], -1 if position % 2 else 1))
    return tuple(table)


class LieAlgebra:
    """su(n) with the generalized Gell-Mann basis T_a = -i lambda_a / 2.

    For n = 2 the basis is T_a = -i sigma_a / 2 and [T_1, T_2] = T_3.
    """

    def __init__(self, rank: int = 2):
        if rank < 2:
            raise DimensionMismatchError(f"su(n) needs n >= 2, got {rank}")
        self.rank = rank
        self.dim = rank * rank - 1
        self.basis = self._build_basis(rank)
        self.structure = self._structure_constants()
        self.bracket_bound = float(np.linalg.norm(self.structure.reshape(self.dim * self.dim, self.dim).T, 2))
        logger.debug("su(%d): dim=%d bracket_bound=%.6f", rank, self.dim, self.bracket_bound)

    @staticmethod
    def _build_basis(n: int) -> np.ndarray:
        gell_mann = []
        for j in range(n):
            for k in range(j + 1, n):
                sym = np.zeros((n, n), dtype=complex)
                sym[j, k] = sym[k, j] = 1.0
                anti = np.zeros((n, n), dtype=complex)
                anti[j, k] = -1j
                anti[k, j] = 1j
                gell_mann.extend([sym, anti])
        for l in range(1, n):
            diag = np.zeros((n, n), dtype=complex)
            diag[np.arange(l), np.arange(l)] = 1.0
            diag[l, l] = -l
            gell_mann.append(np.sqrt(2.0 / (l * (l + 1))) * diag)
        return -0.5j * np.array(gell_mann)

    def _structure_constants(self) -> np.ndarray:
        T = self.basis
        commutators = np.einsum("aij,bjk->abik", T, T) - np.einsum("bij,ajk->abik", T, T)
        return np.real(-2.0 * np.einsum("abij,cji->abc", commutators, T))

    def to_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("...a,aij->...ij", X, self.basis)

    def from_matrix(self, M: np.ndarray) -> np.ndarray:
        """Orthogonal projection of an n x n matrix onto the algebra"""
        return np.real(-2.0 * np.einsum("aij,...ji->...a", self.basis, M))

    def exp(self, X: np.ndarray) -> np.ndarray:
        """Group element exp(X) for a batch of Lie elements"""
        M = self.to_matrix(np.asarray(X, dtype=float))
        flat = M.reshape(-1, self.rank, self.rank)
        out = np.array([expm(m) for m in flat])
        return out.reshape(M.shape)

    def check(self, *elements: np.ndarray) -> None:
        for X in elements:
            if np.shape(X)[-1] != self.dim:
                raise DimensionMismatchError(
                    f"element with {np.shape(X)[-1]} coefficients in an algebra of dimension {self.dim}"
                )

    def __repr__(self) -> str:
        return f"LieAlgebra(rank={self.rank})"


@lru_cache(maxsize=8)
def su(rank: int = 2) -> LieAlgebra:
    return LieAlgebra(rank)


def algebra_for(dim: int) -> LieAlgebra:
    rank = int(round(np.sqrt(dim + 1)))
    if rank * rank - 1 != dim:
        raise DimensionMismatchError(f"no su(n) has dimension {dim}")
    return su(rank)


def bracket(X: np.ndarray, Y: np.ndarray, algebra: Optional[LieAlgebra] = None) -> np.ndarray:
    """[X, Y] on coefficient vectors (broadcast over leading axes)"""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionMismatchError(f"bracket of elements with {X.shape[-1]} and {Y.shape[-1]} coefficients")
    algebra = algebra or algebra_for(X.shape[-1])
    algebra.check(X)
    return np.einsum("abc,...a,...b->...c", algebra.structure, X, Y)


def inner(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """<X, Y> = -2 tr(XY), the dot product of coefficients"""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[-1] != Y.shape[-1]:
        raise DimensionMismatchError(f"inner product of elements with {X.shape[-1]} and {Y.shape[-1]} coefficients")
    return np.sum(X * Y, axis=-1)


def form_norm_sq(omega: FormValue) -> np.ndarray:
    """Pointwise |omega|^2 summed over components (and Lie coefficients)"""
    axes = (0, -1) if omega.kind == ValueKind.LIE else (0,)
    if omega.kind == ValueKind.MATRIX:
        # -2 tr(XX) = 2 |X|_F^2 on anti-hermitian matrices
        return 2.0 * np.sum(np.abs(omega.values) ** 2, axis=(0, -2, -1))
    return np.sum(omega.values ** 2, axis=axes)


def form_inner(omega: FormValue, tau: FormValue) -> np.ndarray:
    """Pointwise <omega, tau> of two forms of equal degree"""
    if omega.degree != tau.degree:
        raise DegreeError(f"pairing a {omega.degree}-form with a {tau.degree}-form")
    axes = (0, -1) if omega.kind == ValueKind.LIE else (0,)
    return np.sum(omega.values * tau.values, axis=axes)


def _pair(pairing: str, x: np.ndarray, y: np.ndarray, omega: FormValue, tau: FormValue,
          algebra: Optional[LieAlgebra]) -> np.ndarray:
    if pairing == "bracket":
        return bracket(x, y, algebra)
    if pairing == "matrix":
        algebra = algebra or algebra_for(x.shape[-1])
        return algebra.to_matrix(x) @ algebra.to_matrix(y)
    if pairing == "scalar":
        if omega.kind == ValueKind.LIE:
            return inner(x, y)
        return x * y
    # scale: real form acting on a g-valued form
    if omega.kind == ValueKind.REAL:
        return x[..., None] * y
    return x * y[..., None]


def _result_kind(pairing: str, omega: FormValue, tau: FormValue) -> ValueKind:
    kinds = (omega.kind, tau.kind)
    if pairing in ("bracket", "matrix"):
        if kinds != (ValueKind.LIE, ValueKind.LIE):
            raise DimensionMismatchError(f"the {pairing} pairing needs two g-valued forms")
        return ValueKind.LIE if pairing == "bracket" else ValueKind.MATRIX
    if pairing == "scalar":
        if kinds[0] != kinds[1] or kinds[0] == ValueKind.MATRIX:
            raise DimensionMismatchError("the scalar pairing needs two real or two g-valued forms")
        return ValueKind.REAL
    if pairing == "scale":
        if set(kinds) != {ValueKind.REAL, ValueKind.LIE}:
            raise DimensionMismatchError("the scale pairing needs one real and one g-valued form")
        return ValueKind.LIE
    raise ValueError(f"unknown pairing {pairing!r}, expected one of {PAIRINGS}")


def wedge(omega: FormValue, tau: FormValue, pairing: str = "bracket",
          algebra: Optional[LieAlgebra] = None) -> FormValue:
    """Graded exterior product with a value pairing.

    bracket: [omega ^ tau], so that F = dA + 1/2 [A ^ A] and d_A w = dw + [A ^ w].
    matrix: matrix product in the defining representation, F = dA + A ^ A.
    scalar: <.,.> for g-valued forms, plain product for real forms.
    scale: a real form times a g-valued form.
    """
    k, l = omega.degree, tau.degree
    if k + l > 4:
        raise DegreeError(f"wedge of degrees {k} and {l} overflows dimension 4")
    kind = _result_kind(pairing, omega, tau)

    out = None
    for i, j, K, sign in wedge_table(k, l):
        term = _pair(pairing, omega.values[i], tau.values[j], omega, tau, algebra)
        if out is None:
            out = np.zeros((comb(4, k + l),) + term.shape, dtype=term.dtype)
        out[K] += sign * term
    return FormValue(degree=k + l, values=out, kind=kind)


def hodge_star(omega: FormValue) -> FormValue:
    """Euclidean Hodge star on R^4, *e^I = sign(I, I^c) e^{I^c}.

    ** = (-1)^{k(4-k)}: the identity on even degrees, minus the identity on odd ones.
    """
    out = np.empty_like(omega.values)
    for i, ic, sign in hodge_table(omega.degree):
        out[ic] = sign * omega.values[i]
    return FormValue(degree=4 - omega.degree, values=out, kind=omega.kind)


def interior(X: np.ndarray, omega: FormValue) -> FormValue:
    """Contraction i_X omega; X has shape (4,) or (4, *batch)"""
    k = omega.degree
    if k == 0:
        raise DegreeError("cannot contract a 0-form")
    X = np.asarray(X, dtype=float)
    out = np.zeros((comb(4, k - 1),) + omega.values.shape[1:])
    for i, mu, rest, sign in interior_table(k):
        coeff = X[mu]
        if omega.kind == ValueKind.LIE:
            coeff = np.asarray(coeff)[..., None]
        out[rest] += sign * coeff * omega.values[i]
    return FormValue(degree=k - 1, values=out, kind=omega.kind)


def basis_one_form(alpha: int, batch_shape=()) -> FormValue:
    """The real coframe element dx^alpha"""
    values = np.zeros((4,) + tuple(batch_shape))
    values[alpha] = 1.0
    return FormValue(degree=1, values=values, kind=ValueKind.REAL)


def vector_one_form(X: np.ndarray) -> FormValue:
    """The real 1-form with coefficients X (shape (4, *batch))"""
    return FormValue(degree=1, values=np.asarray(X, dtype=float), kind=ValueKind.REAL)


def curvature_endo(F: FormValue) -> np.ndarray:
    """The symmetric endomorphism A^{ab} = <dx^a ^ *F, dx^b ^ *F> / (1 + |F|^2).

    Returns an array of shape (*batch, 4, 4).
    """
    if F.degree != 2:
        raise DegreeError(f"curvature_endo needs a 2-form, got degree {F.degree}")
    star_F = hodge_star(F)
    batch = F.batch_shape
    columns: List[np.ndarray] = []
    for alpha in range(4):
        columns.append(wedge(basis_one_form(alpha, batch), star_F, "scale").values)
    G = np.stack(columns)  # (4, 4 components, *batch, dim)
    gram = np.einsum("a c ... d, b c ... d -> ... a b".replace(" ", ""), G, G)
    scale = 1.0 + form_norm_sq(F)
    return gram / scale[..., None, None]
