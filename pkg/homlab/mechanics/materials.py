"""Material laws for second-grade viscoelastic solids

All evaluations are vectorized: points y have shape (..., 2), deformation
gradients F and rates Fdot (..., 2, 2) and second gradients G (..., 2, 2, 2).
Every law is separable, the product of a Y-periodic scalar coefficient and
a kernel depending only on the kinematic argument.
"""
import logging

import numpy as np

from ..exceptions import NonPositiveDet




logger = logging.getLogger(__name__)

#: Spatial dimension
DIM = 2




class Coefficient(object):
    """Y-periodic scalar coefficient scale * (1 + amp/2 sin(2 pi y1) sin(2 pi y2))

    Args:
        scale (float): mean value of the coefficient
        amplitude (float): relative oscillation amplitude, |amplitude| < 2

    Attributes:
        lower_bound (float): guaranteed minimum over Y
        upper_bound (float): guaranteed maximum over Y
    """

    def __init__(self, scale=1., amplitude=1.):
        if scale <= 0:
            raise ValueError('Coefficient scale must be positive')
        if abs(amplitude) >= 2:
            raise ValueError('Coefficient amplitude must satisfy |amp| < 2')
        self.scale = float(scale)
        self.amplitude = float(amplitude)
        self.lower_bound = self.scale * (1 - 0.5 * abs(self.amplitude))
        self.upper_bound = self.scale * (1 + 0.5 * abs(self.amplitude))


    def __repr__(self):
        return 'Coefficient(scale={}, amplitude={})'.format(self.scale,
                                                           self.amplitude)


    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        osc = np.sin(2 * np.pi * y[..., 0]) * np.sin(2 * np.pi * y[..., 1])
        return self.scale * (1 + 0.5 * self.amplitude * osc)


    @property
    def is_constant(self):
        return self.amplitude == 0




def det2(F):
    """Determinant of a batch of 2x2 matrices"""
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def cofactor2(F):
    """Cofactor matrix det(F) F^{-T} of a batch of 2x2 matrices"""
    cof = np.empty_like(F)
    cof[..., 0, 0] = F[..., 1, 1]
    cof[..., 0, 1] = -F[..., 1, 0]
    cof[..., 1, 0] = -F[..., 0, 1]
    cof[..., 1, 1] = F[..., 0, 0]
    return cof


def check_det(F, y=None):
    """Returns det(F), raising NonPositiveDet at the worst point if any is <= 0"""
    det = det2(F)
    if det.size and not np.all(det > 0):
        worst = np.unravel_index(np.argmin(det), det.shape)
        point = None
        if y is not None:
            point = np.broadcast_to(y, det.shape + (DIM,))[worst]
        raise NonPositiveDet(float(det[worst]), point=point)
    return det




class ElasticLaw(object):
    """Polyconvex-type stored energy with a determinant barrier

    W(y, F) = alpha(y) (|F|^2 + det(F)^-q + (q - 2) det(F)) in stress-free
    mode, which makes F = I stationary. Without the correction the last
    term is dropped.

    Args:
        alpha (Coefficient): stiffness coefficient
        q (float): barrier exponent, at least 2
        stress_free_id (bool): include the (q - 2) det(F) correction
        fd_step (float): relative step of the finite-difference curvature
    """

    def __init__(self, alpha=None, q=4, stress_free_id=True, fd_step=1e-6):
        if q < 2:
            raise ValueError('Barrier exponent q must be at least 2')
        self.alpha = Coefficient() if alpha is None else alpha
        self.q = q
        self.stress_free_id = stress_free_id
        self.fd_step = fd_step


    def __repr__(self):
        return 'ElasticLaw(alpha={!r}, q={}, stress_free_id={})'.format(
            self.alpha, self.q, self.stress_free_id)


    @property
    def c0(self):
        return self.alpha.lower_bound


    @property
    def C0(self):
        return 0.


    def evaluate(self, y, F):
        """Returns (W, dW/dF) at a batch of points"""
        F = np.asarray(F, dtype=float)
        det = check_det(F, y)
        a = self.alpha(y)
        corr = (self.q - 2) if self.stress_free_id else 0.
        W = a * (np.einsum('...ij,...ij->...', F, F) + det ** -self.q
                 + corr * det)
        scale = -self.q * det ** -self.q + corr * det
        dW = a[..., None, None] * (2 * F + (scale / det)[..., None, None]
                                   * cofactor2(F))
        return W, dW


    def tangent(self, y, F):
        """Central-difference curvature of W, symmetrized

        Returns:
            Array (..., 2, 2, 2, 2) with A[..., i, j, k, l] = d2W/dF_ij dF_kl
        """
        F = np.asarray(F, dtype=float)
        h = self.fd_step * max(1., float(np.max(np.abs(F))) if F.size else 1.)
        A = np.empty(F.shape + (DIM, DIM))
        for k in range(DIM):
            for l in range(DIM):
                step = np.zeros((DIM, DIM))
                step[k, l] = h
                _, plus = self.evaluate(y, F + step)
                _, minus = self.evaluate(y, F - step)
                A[..., k, l] = (plus - minus) / (2 * h)
        return 0.5 * (A + np.einsum('...ijkl->...klij', A))




class StrainGradientLaw(object):
    """Power-law second-gradient energy H(y, G) = beta(y)/p |G|^p

    Args:
        beta (Coefficient): coefficient of the second-gradient energy
        p (float): growth exponent. p > 2 is required by the existence
            theory in two dimensions; p = 2 is the quadratic mode.
    """

    def __init__(self, beta=None, p=4):
        if p < 2:
            raise ValueError('Strain-gradient exponent p must be at least 2')
        self.beta = Coefficient() if beta is None else beta
        self.p = p


    def __repr__(self):
        return 'StrainGradientLaw(beta={!r}, p={})'.format(self.beta, self.p)


    @property
    def quadratic(self):
        return self.p == 2


    @property
    def c0(self):
        return self.beta.lower_bound / self.p


    @property
    def C0(self):
        return self.beta.upper_bound


    def evaluate(self, y, G):
        """Returns (H, dH/dG) at a batch of points"""
        G = np.asarray(G, dtype=float)
        b = self.beta(y)
        norm2 = np.einsum('...ijk,...ijk->...', G, G)
        H = b / self.p * norm2 ** (0.5 * self.p)
        dH = (b * norm2 ** (0.5 * self.p - 1))[..., None, None, None] * G
        return H, dH


    def tangent(self, y, G):
        """Exact curvature of H

        Returns:
            Array (..., 2, 2, 2, 2, 2, 2) coupling G_ijk to G_lmn
        """
        G = np.asarray(G, dtype=float)
        b = self.beta(y)
        norm2 = np.einsum('...ijk,...ijk->...', G, G)
        flat = G.reshape(G.shape[:-3] + (8,))
        eye = np.eye(8)
        if self.p == 2:
            D = b[..., None, None] * eye
        else:
            safe = np.where(norm2 > 0, norm2, 1.)
            first = b * safe ** (0.5 * self.p - 1)
            second = (self.p - 2) * b * safe ** (0.5 * self.p - 2)
            first = np.where(norm2 > 0, first, 0.)
            second = np.where(norm2 > 0, second, 0.)
            D = (first[..., None, None] * eye
                 + second[..., None, None] * np.einsum('...a,...b->...ab',
                                                       flat, flat))
        return D.reshape(G.shape[:-3] + (DIM,) * 6)




class DissipationLaw(object):
    """Quadratic dissipation potential R = delta(y)/2 |Cdot|^2

    Cdot = Fdot^T F + F^T Fdot is the rate of the right Cauchy-Green tensor,
    so rigid rates Fdot = S F with S skew dissipate nothing.
    """

    def __init__(self, delta=None):
        self.delta = Coefficient() if delta is None else delta


    def __repr__(self):
        return 'DissipationLaw(delta={!r})'.format(self.delta)


    @property
    def c0(self):
        return self.delta.lower_bound


    @property
    def C0(self):
        return self.delta.upper_bound


    def viscosity(self, y, C=None):
        """Returns the scalar multiple of identity D(y, C) = delta(y) I"""
        return self.delta(y)


    def evaluate(self, y, F, Fdot):
        """Returns (R, dR/dFdot) at a batch of points"""
        F = np.asarray(F, dtype=float)
        Fdot = np.asarray(Fdot, dtype=float)
        d = self.viscosity(y)
        FtFdot = np.einsum('...ki,...kj->...ij', F, Fdot)
        Cdot = FtFdot + np.swapaxes(FtFdot, -1, -2)
        R = 0.5 * d * np.einsum('...ij,...ij->...', Cdot, Cdot)
        dR = 2 * d[..., None, None] * np.einsum('...ik,...kj->...ij', F, Cdot)
        return R, dR


    def tangent(self, y, F):
        """Curvature of R in Fdot, independent of Fdot

        Returns:
            Array (..., 2, 2, 2, 2) with
            A_ijkl = 2 delta (F_il F_kj + (F F^T)_ik delta_jl)
        """
        F = np.asarray(F, dtype=float)
        d = self.viscosity(y)
        FFt = np.einsum('...ia,...ka->...ik', F, F)
        A = (np.einsum('...il,...kj->...ijkl', F, F)
             + np.einsum('...ik,jl->...ijkl', FFt, np.eye(DIM)))
        return 2 * d[..., None, None, None, None] * A




class MaterialBundle(object):
    """The three laws of a microscopic material

    Implements the law interface consumed by the incremental solver:
    elastic, elastic_tangent, strain_gradient, strain_gradient_tangent,
    dissipation and dissipation_tangent, each evaluated at cell
    coordinates y.

    Args:
        elastic (ElasticLaw): stored energy W
        gradient (StrainGradientLaw): second-gradient energy H
        dissipation (DissipationLaw): dissipation potential R
    """

    def __init__(self, elastic=None, gradient=None, dissipation=None):
        self.elastic_law = ElasticLaw() if elastic is None else elastic
        self.gradient_law = StrainGradientLaw() if gradient is None \
                            else gradient
        self.dissipation_law = DissipationLaw() if dissipation is None \
                               else dissipation


    def __repr__(self):
        return 'MaterialBundle({!r}, {!r}, {!r})'.format(
            self.elastic_law, self.gradient_law, self.dissipation_law)


    @classmethod
    def from_config(cls, section):
        """Builds a bundle from the material section of a configuration"""
        amp = float(section.get('amplitude', 1.))
        scales = section.get('scales', {}) or {}
        def coef(key):
            return Coefficient(float(scales.get(key, 1.)), amp)
        return cls(ElasticLaw(coef('alpha'), q=section.get('q', 4),
                              stress_free_id=section.get('stress_free_id',
                                                         True)),
                   StrainGradientLaw(coef('beta'), p=section.get('p', 4)),
                   DissipationLaw(coef('delta')))


    @property
    def p(self):
        return self.gradient_law.p


    @property
    def q(self):
        return self.elastic_law.q


    @property
    def stress_free_id(self):
        return self.elastic_law.stress_free_id


    @property
    def c0(self):
        """Common lower growth constant of the three laws"""
        return min(self.elastic_law.c0, self.gradient_law.c0,
                   self.dissipation_law.c0)


    @property
    def C0(self):
        """Common upper growth constant of the three laws"""
        return max(self.elastic_law.C0, self.gradient_law.C0,
                   self.dissipation_law.C0)


    def hypotheses(self):
        """Reports which growth hypotheses of the existence theory hold"""
        p, q = self.p, self.q
        return {
            'p_gt_n': p > DIM,
            'q_admissible': p > DIM and q >= p * DIM / (p - DIM),
            'p': p,
            'q': q,
            'n': DIM,
        }


    def elastic(self, y, F):
        return self.elastic_law.evaluate(y, F)


    def elastic_tangent(self, y, F):
        return self.elastic_law.tangent(y, F)


    def strain_gradient(self, y, G):
        return self.gradient_law.evaluate(y, G)


    def strain_gradient_tangent(self, y, G):
        return self.gradient_law.tangent(y, G)


    def dissipation(self, y, F, Fdot):
        return self.dissipation_law.evaluate(y, F, Fdot)


    def dissipation_tangent(self, y, F):
        return self.dissipation_law.tangent(y, F)




def elastic_eval(law, y, F):
    """Evaluates W and dW/dF"""
    return law.evaluate(y, F)


def gradient_eval(law, y, G):
    """Evaluates H and dH/dG"""
    return law.evaluate(y, G)


def dissipation_eval(law, y, F, Fdot):
    """Evaluates R and dR/dFdot"""
    return law.evaluate(y, F, Fdot)
