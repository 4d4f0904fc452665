"""Vectorized kernels for tensor-product multilinear elements.

A cell is the image of the reference cube [-1, 1]^d under the multilinear
map through its 2^d corner points.  Quadrature is the tensor 2-point Gauss
rule, which integrates the element energy of a multilinear field exactly on
constant-Jacobian cells (sheared boxes and rectangles) and keeps the
standard convergence orders on the mildly distorted cells of boundary-fitted
grids.  All kernels operate on batches of cells.
"""

import functools
import itertools

import numpy as np


def corner_offsets(dim):
    """Corner offset table, shape (2**dim, dim), first axis slowest."""
    return np.array(list(itertools.product((0, 1), repeat=dim)), dtype=np.intp)


def gauss_rule(dim):
    g = 1.0 / np.sqrt(3.0)
    pts = np.array(list(itertools.product((-g, g), repeat=dim)))
    return pts, np.ones(len(pts))


def shape_tables(dim, pts):
    """Multilinear shape values and reference gradients at given points.

    Returns ``(vals, grads)`` with ``vals[q, c]`` and ``grads[q, k, c]``;
    the corner order matches :func:`corner_offsets`.
    """
    signs = 2.0 * corner_offsets(dim) - 1.0
    pts = np.asarray(pts, dtype=float)
    one_d = (1.0 + pts[:, None, :] * signs[None, :, :]) / 2.0
    vals = one_d.prod(axis=2)
    grads = np.empty((pts.shape[0], dim, signs.shape[0]))
    for k in range(dim):
        factor = one_d.copy()
        factor[:, :, k] = signs[None, :, k] / 2.0
        grads[:, k, :] = factor.prod(axis=2)
    return vals, grads


@functools.lru_cache(maxsize=None)
def default_rule(dim):
    """Cached (points, weights, shape values, shape gradients) tuple."""
    pts, wts = gauss_rule(dim)
    vals, grads = shape_tables(dim, pts)
    for arr in (pts, wts, vals, grads):
        arr.setflags(write=False)
    return pts, wts, vals, grads


def geometry(corners, pts, wts, vals, ref_grads):
    """Physical quadrature data for a batch of cells.

    Parameters
    ----------
    corners : ndarray, shape (C, 2**d, d)
        Physical corner coordinates per cell.
    pts, wts, vals, ref_grads
        Quadrature rule and shape tables (see :func:`default_rule`).

    Returns
    -------
    phys : ndarray, shape (C, q, d)
        Physical coordinates of the quadrature points.
    detw : ndarray, shape (C, q)
        Jacobian determinant times quadrature weight.
    grads : ndarray, shape (C, q, d, 2**d)
        Physical shape-function gradients.
    """
    phys = np.einsum("qc,ncl->nql", vals, corners)
    jac = np.einsum("qkc,ncl->nqkl", ref_grads, corners)
    det = np.linalg.det(jac)
    if np.any(det <= 0.0):
        raise ValueError("degenerate cell: nonpositive Jacobian determinant")
    rhs = np.broadcast_to(ref_grads, (corners.shape[0],) + ref_grads.shape)
    grads = np.linalg.solve(jac, rhs)
    return phys, det * wts, grads


def stiffness_kernel(detw, grads, acoef):
    """Element stiffness blocks for the form A[a,b,i,j] d_a u_i d_b phi_j.

    ``acoef`` has shape (C, q, d, d, N, N); the result has shape
    (C, 2**d * N, 2**d * N) with local dof index ``corner * N + component``.
    """
    kloc = np.einsum("nq,nqabij,nqam,nqbp->nminj", detw, acoef, grads, grads,
                     optimize=True)
    ncell, ncorn, ncomp = kloc.shape[0], kloc.shape[1], kloc.shape[2]
    return kloc.reshape(ncell, ncorn * ncomp, ncorn * ncomp)


def source_kernel(detw, vals, fvals):
    """Element load for a volumetric source, fvals shape (C, q, N)."""
    floc = np.einsum("nq,qm,nqi->nmi", detw, vals, fvals)
    return floc.reshape(floc.shape[0], -1)


def flux_kernel(detw, grads, gvals):
    """Element load for a flux source, gvals shape (C, q, d, N).

    Returns the value of ``integral G . grad(phi)``; the caller fixes the
    sign of the divergence-source convention.
    """
    floc = np.einsum("nq,nqam,nqai->nmi", detw, grads, gvals)
    return floc.reshape(floc.shape[0], -1)


def values_at(vals, nodal):
    """Field values at quadrature points; nodal shape (C, 2**d, N)."""
    return np.einsum("qm,nmi->nqi", vals, nodal)


def gradients_at(grads, nodal):
    """Field gradients at quadrature points, shape (C, q, d, N)."""
    return np.einsum("nqam,nmi->nqai", grads, nodal)
