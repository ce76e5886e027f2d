"""Custom exceptions for homlab module"""

class HomLabException(Exception):
    """Root exception. Used only to except any error, never raised."""
    pass




class GeometryError(HomLabException):
    """Called when a unit cell or perforated domain is inadmissible"""
    pass

class HoleTouchesBoundary(GeometryError):
    """Called when the closure of the hole intersects the boundary of Y"""
    pass

class MisalignedHole(GeometryError):
    """Called when a hole corner does not lie on the element grid"""
    pass

class NonIntegerInverseEps(GeometryError):
    """Called when 1/eps is not a positive integer"""
    pass

class DisconnectedSolid(GeometryError):
    """Called when flood fill finds more than one solid component"""
    pass

class UnknownTag(GeometryError):
    """Called when a boundary tag is not one of the FacetTag members"""
    pass




class SpaceError(HomLabException):
    """Called when a discrete space is used outside its domain of validity"""
    pass

class PeriodicOnMacroDomain(SpaceError):
    """Called when a periodic space is requested on a macroscopic domain"""
    pass

class PeriodicSpace(SpaceError):
    """Called when Dirichlet data is applied to a periodic space"""
    pass

class PointInVoid(SpaceError):
    """Called when a field is evaluated at a point inside a hole"""

    def __init__(self, point):
        self.point = point
        super(PointInVoid, self).__init__(
            'Point {} lies in a void element'.format(tuple(point)))

class NonFiniteDensity(SpaceError):
    """Called when an integrand is not finite at a quadrature point"""

    def __init__(self, point):
        self.point = point
        super(NonFiniteDensity, self).__init__(
            'Density is not finite at {}'.format(tuple(point)))

class FieldNotGlobal(SpaceError):
    """Called when an operation needs a field defined on all of the domain"""
    pass




class MaterialError(HomLabException):
    """Called when a material law is evaluated outside its domain"""
    pass

class NonPositiveDet(MaterialError):
    """Called when det(F) <= 0, i.e. the deformation left GL+(n)

    Attributes:
        point: location of the worst quadrature point, if known
        value (float): the offending determinant
    """

    def __init__(self, value, point=None):
        self.value = value
        self.point = point
        msg = 'Non-positive determinant {:.6g}'.format(value)
        if point is not None:
            msg += ' at {}'.format(tuple(point))
        super(NonPositiveDet, self).__init__(msg)




class SolverError(HomLabException):
    """Called when a nonlinear, linear, or eigen solve fails

    Attributes:
        step (int): index of the time step, set when propagated by a
            trajectory
    """
    step = None

class LineSearchFailed(SolverError):
    """Called when backtracking cannot keep the determinant floor"""
    pass

class MaxItersExceeded(SolverError):
    """Called when Newton does not converge in the allowed iterations"""
    pass

class SingularSystem(SolverError):
    """Called when a linear system cannot be factorized"""
    pass

class IndefiniteSystem(SolverError):
    """Called when a curvature matrix that must be convex is not"""
    pass

class SingularFill(SolverError):
    """Called when the biharmonic hole fill system is singular"""
    pass

class EigenNoConvergence(SolverError):
    """Called when the generalized eigensolver does not converge"""
    pass




class AnalysisError(HomLabException):
    """Called when a diagnostic is requested with incomplete inputs"""
    pass

class MissingCorrector(AnalysisError):
    """Called when a second-order distance is requested without corrector"""
    pass

class ZeroDirichletSet(AnalysisError):
    """Called when a constant estimate needs a nonempty Dirichlet boundary"""
    pass




class ConfigError(HomLabException):
    """Called when an experiment configuration does not validate

    Attributes:
        field (str): dotted path of the offending configuration field
    """

    def __init__(self, field, message):
        self.field = field
        super(ConfigError, self).__init__('{}: {}'.format(field, message))

class ManifestError(HomLabException):
    """Called when a run manifest is missing or cannot be parsed"""
    pass
