"""H(div)-conforming direct mixed elements on convex polygons.

The flux space of index r (divergence index s = r-1 reduced, s = r full)
is generated from the scalar space of index r+1: curls of its edge and
interior functions give divergence-free basis functions, while radial
fields (x - c) p(x) carry the divergence.  The basis comes in four
families:

* one constant-flux function per edge: unit integrated flux across its
  own edge, zero across the others, constant divergence;
* r flux-moment functions per edge (curls of edge functions): zero
  average flux, zero divergence;
* interior divergence functions, one per nonconstant pressure mode,
  with zero normal trace on the whole boundary;
* interior curl bubbles (zero normal trace, zero divergence), which
  exist only when r >= N-1.

Construction is pure per element and built elements are immutable.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as nleg
from numpy.polynomial import polynomial as npoly

from .functions import (
    Constant,
    CurlField,
    Polynomial2D,
    RadialPoly,
    ScalarCombination,
    VectorCombination,
    VectorOfScalars,
    _as_points,
)
from .geometry import Polygon
from .quadrature import edge_rule, polygon_rule
from .serendipity import DSElement, ElementError, _lagrange_1d, build_ds_element

__all__ = [
    "MixedElement",
    "mixed_dimension",
    "curl_of",
    "constant_flux_coefficients",
    "build_bubble_curls",
    "build_edge_moment_fns",
    "build_constant_flux_fns",
    "build_divergence_fns",
    "build_mixed_element",
    "mixed_interpolant",
    "pressure_monomials",
]

_CONST_X = VectorOfScalars(Constant(1.0), Constant(0.0))
_CONST_Y = VectorOfScalars(Constant(0.0), Constant(1.0))


def mixed_dimension(N: int, r: int, s: int) -> int:
    """Dimension of the index-(r, s) mixed space on an N-gon."""
    _check_rs(r, s)
    bubbles = (r - N + 3) * (r - N + 2) // 2 if r >= N - 1 else 0
    return N * (r + 1) - 1 + (s + 2) * (s + 1) // 2 + bubbles


def _check_rs(r, s):
    if r < 0:
        raise ValueError(f"flux index must be >= 0, got r={r}")
    if s not in (r - 1, r) or s < 0:
        raise ValueError(f"divergence index s={s} must be r-1 or r and >= 0")


def curl_of(phi):
    """Divergence-free rotated gradient of a scalar field."""
    return CurlField(phi)


def pressure_monomials(E: Polygon, s: int, include_constant=True):
    """Centered, scaled monomials up to total degree s on E."""
    fns = []
    for deg in range(0 if include_constant else 1, s + 1):
        for a in range(deg + 1):
            b = deg - a
            coeffs = np.zeros((a + 1, b + 1))
            coeffs[a, b] = 1.0
            fns.append(Polynomial2D(E.centroid, E.diameter, coeffs))
    return fns


def constant_flux_coefficients(E: Polygon, k: int):
    """Cancellation constants for the constant-flux function of edge k.

    Entry m (0-based) belongs to edge k+3+m (mod N); the last entry belongs
    to edge k itself and normalizes the flux.  All entries are strictly
    positive on a strictly convex polygon.
    """
    N = E.n_edges
    lam = E.edge_distances()
    lengths = E.edge_lengths
    anchor = E.vertices[(k + 2) % N]
    out = []
    prev = 0.0
    for m in range(k + 3, k + N + 1):
        em = m % N
        dist = lam[em](anchor)  # distance of the anchor vertex to edge line em
        prev = dist + (lengths[(m - 1) % N] / lengths[em]) * prev
        out.append(prev)
    return np.asarray(out)


def _scalar_row_index(ds: DSElement, kind, k, j=0):
    N = ds.polygon.n_edges
    per_edge = ds.r - 1
    if kind == "vertex":
        return k
    if kind == "edge":
        return N + k * per_edge + (j - 1)
    if kind == "interior":
        return N + N * per_edge + k
    raise KeyError(kind)


def _vertex_ramp_rows(ds: DSElement):
    """Coefficient rows (over the scalar generators) of functions whose
    trace ramps linearly 0 -> 1 along edge k-1 and 1 -> 0 along edge k for
    each vertex k, and vanishes on every other edge."""
    N = ds.polygon.n_edges
    order = ds.r  # the scalar element has index r+1
    rows = np.zeros((N, ds.n_generators))
    for k in range(N):
        rows[k] += ds.coeffs[_scalar_row_index(ds, "vertex", k)]
        for j in range(1, order):
            w = j / order
            rows[k] += w * ds.coeffs[_scalar_row_index(ds, "edge", (k - 1) % N, j)]
            rows[k] += (1.0 - w) * ds.coeffs[_scalar_row_index(ds, "edge", k, j)]
    return rows


def _constant_flux_data(ds: DSElement):
    """Per-edge data for the constant-flux functions: a curl coefficient
    row over the scalar generators, a coefficient for the radial field
    x - c, and a constant vector part."""
    E = ds.polygon
    N = E.n_edges
    lengths = E.edge_lengths
    ramps = _vertex_ramp_rows(ds)
    curl_rows = np.zeros((N, ds.n_generators))
    radial = np.empty(N)
    const = np.empty((N, 2))
    for k in range(N):
        coeffs = constant_flux_coefficients(E, k)
        scale = 1.0 / (coeffs[-1] * lengths[k])
        row = np.zeros(ds.n_generators)
        for m, cm in zip(range(k + 3, k + N), coeffs):
            row -= cm * lengths[m % N] * ramps[(m + 1) % N]
        curl_rows[k] = row * scale
        radial[k] = scale
        const[k] = (E.centroid - E.vertices[(k + 2) % N]) * scale
    return curl_rows, radial, const


def _edge_flux_expansion(E: Polygon, k: int, r: int, p):
    """Coefficients alpha_{0..r} expanding the normal flux of (x - c) p on
    edge k in the edge flux basis (constant 1/|e| plus Lagrange-derivative
    moments), found by matching antiderivatives at the Lagrange points."""
    c_k = float((E.vertices[k] - E.centroid) @ E.normals[k])
    length = E.edge_lengths[k]
    deg = (p.coeffs.shape[0] - 1) + (p.coeffs.shape[1] - 1)
    tfit = np.linspace(0.0, 1.0, deg + 1)
    pts = E.edge_point(k, tfit).reshape(-1, 2)
    gcoef = npoly.polyfit(tfit, length * c_k * p(pts), deg)
    big = npoly.polyint(gcoef)
    t_lag = np.arange(1, r + 2) / (r + 1)
    big_vals = npoly.polyval(t_lag, big)
    alphas = np.empty(r + 1)
    alphas[0] = big_vals[-1]
    alphas[1:] = big_vals[:-1] - big_vals[-1] * t_lag[:-1]
    return alphas


def _scalar_element(obj, what):
    if isinstance(obj, MixedElement):
        return obj.ds
    if isinstance(obj, DSElement):
        if obj.r < 1:
            raise ElementError(f"{what} needs a scalar element of index >= 1")
        return obj
    raise TypeError(f"{what} expects a DSElement or MixedElement, got {type(obj)!r}")


def build_bubble_curls(elem):
    """Curls of the interior scalar functions; empty unless r >= N-1."""
    ds = _scalar_element(elem, "build_bubble_curls")
    n0 = ds.dim - ds.nodes.n_interior
    return [CurlField(ds.basis[n0 + i]) for i in range(ds.nodes.n_interior)]


def build_edge_moment_fns(elem):
    """Per-edge lists of the r flux-moment functions (curls of edge
    functions of the index r+1 scalar element)."""
    ds = _scalar_element(elem, "build_edge_moment_fns")
    N = ds.polygon.n_edges
    return [
        [
            CurlField(ds.basis[_scalar_row_index(ds, "edge", k, j)])
            for j in range(1, ds.r)
        ]
        for k in range(N)
    ]


def build_constant_flux_fns(elem):
    """Per-edge constant-flux functions: integrated flux 1 across the own
    edge, 0 across every other edge, and constant divergence."""
    ds = _scalar_element(elem, "build_constant_flux_fns")
    E = ds.polygon
    curl_rows, radial, const = _constant_flux_data(ds)
    ones = Polynomial2D(E.centroid, E.diameter, np.ones((1, 1)))
    fns = []
    for k in range(E.n_edges):
        fields = [CurlField(ScalarCombination(curl_rows[k], ds.generators))]
        coeffs = [1.0, radial[k], const[k, 0], const[k, 1]]
        fields += [RadialPoly(E.centroid, ones), _CONST_X, _CONST_Y]
        fns.append(VectorCombination(coeffs, fields))
    return fns


def build_divergence_fns(elem, s=None):
    """Interior divergence functions, one per nonconstant pressure mode."""
    ds = _scalar_element(elem, "build_divergence_fns")
    if s is None:
        if not isinstance(elem, MixedElement):
            raise ValueError("pass the divergence index s when building from a DSElement")
        s = elem.s
    E = ds.polygon
    r = ds.r - 1
    if s < 1:
        return []
    const_fns = build_constant_flux_fns(ds)
    moment_fns = build_edge_moment_fns(ds)
    fns = []
    for p in pressure_monomials(E, s, include_constant=False):
        fields = [RadialPoly(E.centroid, p)]
        coeffs = [1.0]
        for k in range(E.n_edges):
            alphas = _edge_flux_expansion(E, k, r, p)
            fields.append(const_fns[k])
            coeffs.append(-alphas[0])
            for j in range(1, r + 1):
                fields.append(moment_fns[k][j - 1])
                coeffs.append(-alphas[j])
        fns.append(VectorCombination(coeffs, fields))
    return fns


class MixedElement:
    """Mixed element: ordered vector basis over a shared generator set.

    Basis ordering: per edge (CCW) the constant-flux function followed by
    the r moment functions, then the interior divergence functions, then
    the curl bubbles.  ``dof_layout`` holds matching descriptors
    ``("edge", k, j)``, ``("div", i)``, and ``("bubble", i)``.
    """

    def __init__(self, polygon, r, s, ds, rows, radial_fns, dof_layout):
        self.polygon = polygon
        self.r = r
        self.s = s
        self.ds = ds
        self.rows = np.asarray(rows, dtype=float)
        self._radial_fns = tuple(radial_fns)
        self.dof_layout = tuple(dof_layout)
        self._basis = None
        self._interp = None

    @property
    def dim(self):
        return len(self.rows)

    @property
    def basis(self):
        if self._basis is None:
            gens = (
                [CurlField(g) for g in self.ds.generators]
                + list(self._radial_fns)
                + [_CONST_X, _CONST_Y]
            )
            self._basis = [VectorCombination(row, gens) for row in self.rows]
        return self._basis

    def layout_index(self, key):
        return self.dof_layout.index(key)

    def eval_all(self, pts):
        """Values and divergences of all basis functions: (D, M, 2), (D, M)."""
        pts = _as_points(pts)
        m = len(pts)
        nc = self.ds.n_generators
        nr = len(self._radial_fns)
        gvals = np.empty((nc + nr + 2, m, 2))
        gdivs = np.zeros((nc + nr + 2, m))
        for g, fn in enumerate(self.ds.generators):
            _, grad = fn.value_grad(pts)
            gvals[g, :, 0] = grad[:, 1]
            gvals[g, :, 1] = -grad[:, 0]
        for i, fn in enumerate(self._radial_fns):
            gvals[nc + i], gdivs[nc + i] = fn.value_div(pts)
        gvals[nc + nr] = [1.0, 0.0]
        gvals[nc + nr + 1] = [0.0, 1.0]
        vals = np.einsum("dg,gmk->dmk", self.rows, gvals)
        divs = self.rows @ gdivs
        return vals, divs

    def edge_lagrange(self):
        """Coefficient arrays of the degree r+1 equispaced Lagrange basis
        on [0, 1] (the flux moment traces are their scaled derivatives)."""
        return _lagrange_1d(np.arange(self.r + 2) / (self.r + 1))

    def interpolation_system(self, quad_degree=None):
        """Square DoF matrix of the basis, cached per quadrature degree."""
        if self._interp is None or self._interp[2] != quad_degree:
            dofs = _dof_functionals(self, quad_degree)
            A = np.empty((self.dim, self.dim))
            cache = {}
            for d, (kind, pts, w, extra) in enumerate(dofs):
                if id(pts) not in cache:
                    cache[id(pts)] = self.eval_all(pts)[0]
                vals = cache[id(pts)]
                if kind == "edge":
                    A[d] = np.einsum("imk,k,m->i", vals, extra, w)
                else:
                    A[d] = np.einsum("imk,mk,m->i", vals, extra, w)
            self._interp = (dofs, A, quad_degree)
        return self._interp[:2]


def build_mixed_element(E: Polygon, r: int, s: int, pair_kind="midpoint") -> MixedElement:
    """Assemble the four basis families for the index-(r, s) mixed space."""
    _check_rs(r, s)
    N = E.n_edges
    ds = build_ds_element(E, r + 1, pair_kind=pair_kind)
    G = ds.n_generators
    radial_fns = [RadialPoly(E.centroid, p) for p in pressure_monomials(E, s)]
    n_rad = len(radial_fns)
    width = G + n_rad + 2

    curl_rows, radial_c, const_c = _constant_flux_data(ds)
    rows = []
    layout = []
    for k in range(N):
        row = np.zeros(width)
        row[:G] = curl_rows[k]
        row[G] = radial_c[k]
        row[G + n_rad:] = const_c[k]
        rows.append(row)
        layout.append(("edge", k, 0))
        for j in range(1, r + 1):
            row = np.zeros(width)
            row[:G] = ds.coeffs[_scalar_row_index(ds, "edge", k, j)]
            rows.append(row)
            layout.append(("edge", k, j))

    edge_row = {lay[1:]: rows[i] for i, lay in enumerate(layout)}
    for i, p in enumerate(pressure_monomials(E, s, include_constant=False)):
        row = np.zeros(width)
        row[G + 1 + i] = 1.0
        for k in range(N):
            alphas = _edge_flux_expansion(E, k, r, p)
            for j in range(r + 1):
                row = row - alphas[j] * edge_row[(k, j)]
        rows.append(row)
        layout.append(("div", i))

    if r >= N - 1:
        for i in range(ds.nodes.n_interior):
            row = np.zeros(width)
            row[:G] = ds.coeffs[_scalar_row_index(ds, "interior", i)]
            rows.append(row)
            layout.append(("bubble", i))

    expected = mixed_dimension(N, r, s)
    if len(rows) != expected:
        raise ElementError(f"assembled {len(rows)} functions, expected {expected}")
    return MixedElement(E, r, s, ds, np.array(rows), radial_fns, layout)


def _dof_functionals(elem: MixedElement, quad_degree=None):
    """Unisolvent DoFs: edge flux moments against Legendre polynomials,
    interior moments against pressure gradients, and bubble moments."""
    E = elem.polygon
    r, s = elem.r, elem.s
    if quad_degree is None:
        quad_degree = 2 * (r + 1) + 4
    dofs = []
    for k in range(E.n_edges):
        rule = edge_rule(E, k, quad_degree)
        for m in range(r + 1):
            leg = nleg.leg2poly([0.0] * m + [1.0])
            w = rule.weights * npoly.polyval(2.0 * rule.t - 1.0, leg)
            dofs.append(("edge", rule.points, w, E.normals[k]))
    rule = polygon_rule(E, quad_degree)
    if s >= 1:
        for q in pressure_monomials(E, s, include_constant=False):
            _, grad = q.value_grad(rule.points)
            dofs.append(("moment", rule.points, rule.weights, grad))
    for i, lay in enumerate(elem.dof_layout):
        if lay[0] == "bubble":
            bv, _ = elem.basis[i].value_div(rule.points)
            dofs.append(("moment", rule.points, rule.weights, bv))
    return dofs


def _apply_dofs(dofs, v):
    out = np.empty(len(dofs))
    for i, (kind, pts, w, extra) in enumerate(dofs):
        vals = v.value_div(pts)[0] if hasattr(v, "value_div") else np.asarray(v(pts))
        if kind == "edge":
            out[i] = w @ (vals @ extra)
        else:
            out[i] = w @ np.einsum("mk,mk->m", vals, extra)
    return out


def mixed_interpolant(elem: MixedElement, v_exact, quad_degree=None):
    """Coefficients of the local interpolant of ``v_exact``.

    Matches the edge flux moments against polynomials of degree r, the
    interior moments against gradients of nonconstant pressures, and the
    curl-bubble moments; this is exactly the DoF set of the space, so
    members are reproduced and the divergence of the interpolant is the
    pressure-space projection of the divergence of ``v_exact``.
    """
    dofs, A = elem.interpolation_system(quad_degree)
    b = _apply_dofs(dofs, v_exact)
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise ElementError(f"singular interpolation system: {exc}") from None
