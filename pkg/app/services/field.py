"""Discrete exterior calculus on lattice domains.

d uses forward differences and d* = -sum D^-_mu i_{e_mu}, its exact adjoint under
the plain site sum h^4 sum_s <.,.> over the box. On the torus differences wrap;
on balls and annuli a zero ghost layer sits outside the box.
"""

import logging
from math import comb
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from app.core.exceptions import DegreeError, DomainMismatchError, NonUnitaryError
from app.models.fields import (
    CurvatureField,
    FormValue,
    GaugeField,
    GaugeTransform,
    LatticeForm,
    ValueKind,
    require_same_domain,
)
from app.models.lattice import Domain
from app.services.algebra import algebra_for, bracket, form_inner, wedge, wedge_table

logger = logging.getLogger(__name__)

UNITARITY_TOLERANCE = 1e-12

Difference = Callable[[np.ndarray, int, Domain], np.ndarray]


def shift(c: np.ndarray, mu: int, step: int, domain: Domain, clamp: bool = False) -> np.ndarray:
    """Value at s + step e_mu for an array whose first four axes are the lattice"""
    if domain.periodic:
        return np.roll(c, -step, axis=mu)
    out = np.copy(c) if clamp else np.zeros_like(c)
    lead = (slice(None),) * mu
    if step == 1:
        out[lead + (slice(None, -1),)] = c[lead + (slice(1, None),)]
    else:
        out[lead + (slice(1, None),)] = c[lead + (slice(None, -1),)]
    return out


def forward_difference(c: np.ndarray, mu: int, domain: Domain) -> np.ndarray:
    return (shift(c, mu, 1, domain) - c) / domain.h


def backward_difference(c: np.ndarray, mu: int, domain: Domain) -> np.ndarray:
    return (c - shift(c, mu, -1, domain)) / domain.h


def centered_difference(c: np.ndarray, mu: int, domain: Domain) -> np.ndarray:
    return (shift(c, mu, 1, domain) - shift(c, mu, -1, domain)) / (2.0 * domain.h)


def _rewrap(template: LatticeForm, values: np.ndarray, degree: int, kind: Optional[ValueKind] = None) -> LatticeForm:
    return LatticeForm(degree=degree, values=values, kind=kind or template.kind, domain=template.domain)


def _exterior_derivative(omega: LatticeForm, diff: Difference) -> np.ndarray:
    k = omega.degree
    if k > 3:
        raise DegreeError("d of a 4-form overflows dimension 4")
    out = np.zeros((comb(4, k + 1),) + omega.values.shape[1:])
    for mu, i, K, sign in wedge_table(1, k):
        out[K] += sign * diff(omega.values[i], mu, omega.domain)
    return out


def d(omega: LatticeForm) -> LatticeForm:
    """Exterior derivative with forward differences"""
    return _rewrap(omega, _exterior_derivative(omega, forward_difference), omega.degree + 1)


def d_star(omega: LatticeForm) -> LatticeForm:
    """Codifferential, the exact adjoint of ``d``"""
    k = omega.degree
    if k == 0:
        raise DegreeError("d* of a 0-form is undefined")
    out = np.zeros((comb(4, k - 1),) + omega.values.shape[1:])
    for mu, i, K, sign in wedge_table(1, k - 1):
        out[i] -= sign * backward_difference(omega.values[K], mu, omega.domain)
    return _rewrap(omega, out, k - 1)


def covariant_d(A: GaugeField, omega: LatticeForm) -> LatticeForm:
    """d_A w = dw + [A ^ w] (pointwise bracket at the base site)"""
    require_same_domain(A, omega)
    bracket_part = wedge(A, omega, "bracket").values
    return _rewrap(omega, _exterior_derivative(omega, forward_difference) + bracket_part, omega.degree + 1)


def covariant_d_star(A: GaugeField, beta: LatticeForm) -> LatticeForm:
    """Exact adjoint of ``covariant_d``; equals d* beta - *[A ^ *beta] pointwise"""
    require_same_domain(A, beta)
    k = beta.degree
    if k == 0:
        raise DegreeError("d_A* of a 0-form is undefined")
    algebra = algebra_for(A.dim)
    out = np.zeros((comb(4, k - 1),) + beta.values.shape[1:])
    for mu, i, K, sign in wedge_table(1, k - 1):
        out[i] -= sign * (
            backward_difference(beta.values[K], mu, beta.domain) + bracket(A.values[mu], beta.values[K], algebra)
        )
    return _rewrap(beta, out, k - 1)


def curvature(A: GaugeField, centered: bool = False) -> CurvatureField:
    """F = dA + 1/2 [A ^ A], i.e. F_{mu nu} = D_mu A_nu - D_nu A_mu + [A_mu, A_nu].

    ``centered`` swaps the forward differences for centered ones (second order,
    used by the pointwise Kato-Yau and Bochner checks).
    """
    diff = centered_difference if centered else forward_difference
    values = _exterior_derivative(A, diff) + 0.5 * wedge(A, A, "bracket").values
    return CurvatureField(degree=2, values=values, kind=ValueKind.LIE, domain=A.domain)


def bianchi_residual(A: GaugeField) -> float:
    """L^2 norm of d_A F_A over the interior (support) sites"""
    F = curvature(A)
    dF = covariant_d(A, F)
    support = A.domain.geometry.support
    density = np.sum(dF.values ** 2, axis=(0, -1))
    return float(np.sqrt(A.domain.cell_volume * density[support].sum()))


def covariant_gradient(A: GaugeField, omega: LatticeForm, centered: bool = False) -> np.ndarray:
    """Tensor gradient (nabla_A omega)_mu = D_mu omega + [A_mu, omega], shape (4, *omega.values.shape)"""
    require_same_domain(A, omega)
    diff = centered_difference if centered else forward_difference
    algebra = algebra_for(A.dim)
    out = np.empty((4,) + omega.values.shape)
    for mu in range(4):
        out[mu] = diff(omega.values, mu + 1, omega.domain) + bracket(A.values[mu][None], omega.values, algebra)
    return out


def scalar_gradient(f: np.ndarray, domain: Domain, centered: bool = False) -> np.ndarray:
    """Gradient of a real scalar field, shape (4, *domain.shape)"""
    diff = centered_difference if centered else forward_difference
    return np.stack([diff(f, mu, domain) for mu in range(4)])


def scalar_hessian(f: np.ndarray, domain: Domain) -> np.ndarray:
    """Centered second differences of a real scalar field, shape (4, 4, *domain.shape)"""
    h = domain.h
    out = np.empty((4, 4) + f.shape)
    for a in range(4):
        out[a, a] = (shift(f, a, 1, domain) - 2.0 * f + shift(f, a, -1, domain)) / h ** 2
        ahead, behind = shift(f, a, 1, domain), shift(f, a, -1, domain)
        for b in range(a + 1, 4):
            mixed = (shift(ahead, b, 1, domain) - shift(ahead, b, -1, domain)
                     - shift(behind, b, 1, domain) + shift(behind, b, -1, domain)) / (4.0 * h ** 2)
            out[a, b] = out[b, a] = mixed
    return out


def gauge_transform(A: GaugeField, g: GaugeTransform) -> GaugeField:
    """A^g = g^{-1} A g + g^{-1} D^+ g, projected onto the algebra.

    On balls and annuli the shift of g is clamped at the box edge.
    """
    if g.domain != A.domain:
        raise DomainMismatchError(f"gauge transform on {g.domain!r}, field on {A.domain!r}")
    algebra = algebra_for(A.dim)
    n = algebra.rank
    gdag = np.conj(np.swapaxes(g.values, -1, -2))
    defect = np.max(np.abs(gdag @ g.values - np.eye(n)))
    if defect > UNITARITY_TOLERANCE:
        raise NonUnitaryError(f"gauge transform departs from unitarity by {defect:.3e}")

    out = np.empty_like(A.values)
    for mu in range(4):
        conj = gdag @ algebra.to_matrix(A.values[mu]) @ g.values
        ahead = shift(g.values, mu, 1, A.domain, clamp=True)
        log_derivative = (gdag @ ahead - np.eye(n)) / A.domain.h
        out[mu] = algebra.from_matrix(conj + log_derivative)
    return GaugeField.from_values(A.domain, out)


def constant_gauge(domain: Domain, element: np.ndarray) -> GaugeTransform:
    values = np.broadcast_to(element, domain.shape + element.shape).copy()
    return GaugeTransform(domain=domain, values=values)


def integrate(f: np.ndarray, domain: Domain) -> float:
    """h^4 sum of f over the domain region"""
    f = np.asarray(f, dtype=float)
    return float(domain.cell_volume * f[domain.geometry.region].sum())


def l2_inner(alpha: FormValue, beta: LatticeForm) -> float:
    """Discrete L^2 pairing over the region"""
    return integrate(form_inner(alpha, beta), beta.domain)


def l2_norm(alpha: LatticeForm) -> float:
    return float(np.sqrt(max(l2_inner(alpha, alpha), 0.0)))


def box_inner(alpha: LatticeForm, beta: LatticeForm) -> float:
    """Pairing over every box site, the one for which d and d* are exact adjoints"""
    require_same_domain(alpha, beta)
    return float(alpha.domain.cell_volume * np.sum(form_inner(alpha, beta)))


def gradient_norm_sq(omega: LatticeForm) -> float:
    """||nabla omega||^2 with the componentwise forward gradient, over the box"""
    total = 0.0
    for mu in range(4):
        total += float(np.sum(forward_difference(omega.values, mu + 1, omega.domain) ** 2))
    return omega.domain.cell_volume * total


# Sparse assembly

def difference_matrix(n: int, h: float, periodic: bool) -> sparse.csr_matrix:
    """1-D forward difference on n sites"""
    rows = [np.arange(n), np.arange(n - 1)]
    cols = [np.arange(n), np.arange(1, n)]
    vals = [-np.ones(n), np.ones(n - 1)]
    if periodic:
        rows.append(np.array([n - 1]))
        cols.append(np.array([0]))
        vals.append(np.array([1.0]))
    D = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return (D / h).tocsr()


def axis_difference(domain: Domain, mu: int, dim: int) -> sparse.csr_matrix:
    """Forward difference along axis mu acting on (site, Lie) flattened vectors"""
    n = domain.sites_per_axis
    D1 = difference_matrix(n, domain.h, domain.periodic)
    before = sparse.identity(n ** mu, format="csr")
    after = sparse.identity(n ** (3 - mu) * dim, format="csr")
    return sparse.kron(sparse.kron(before, D1), after, format="csr")


def adjoint_action(A: GaugeField, mu: int) -> sparse.bsr_matrix:
    """Block-diagonal matrix of X -> [A_mu, X] per site"""
    algebra = algebra_for(A.dim)
    dim = A.dim
    coeffs = A.values[mu].reshape(-1, dim)
    blocks = np.einsum("abc,sa->scb", algebra.structure, coeffs)
    n_sites = coeffs.shape[0]
    return sparse.bsr_matrix(
        (blocks, np.arange(n_sites), np.arange(n_sites + 1)), shape=(n_sites * dim, n_sites * dim)
    )


def operator_matrix(A: GaugeField, degree: int) -> sparse.csr_matrix:
    """Sparse d_A from g-valued k-forms to (k+1)-forms on the flattened layout.

    Vectors are ``values.reshape(-1)`` of a (components, N, N, N, N, dim) array.
    The transpose is d_A*.
    """
    if degree > 3:
        raise DegreeError("d_A of a 4-form overflows dimension 4")
    diffs = [axis_difference(A.domain, mu, A.dim) for mu in range(4)]
    adjoints = [adjoint_action(A, mu).tocsr() for mu in range(4)]
    rows, cols = comb(4, degree + 1), comb(4, degree)
    blocks = [[None] * cols for _ in range(rows)]
    for mu, i, K, sign in wedge_table(1, degree):
        term = sign * (diffs[mu] + adjoints[mu])
        blocks[K][i] = term if blocks[K][i] is None else blocks[K][i] + term
    return sparse.bmat(blocks, format="csr")


def sample_scalar(domain: Domain, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Evaluate fn on the site coordinates, shape (4, N, N, N, N) in, scalar field out"""
    return np.asarray(fn(domain.geometry.coords), dtype=float)
