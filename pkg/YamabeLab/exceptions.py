from . import cfg


class YamabeLabError(Exception):

    code = 100
    error_msg = 'YamabeLab error.'
    exit_code = cfg.EXIT_SOLVER

    def __init__(self, detail=None):
        self.detail = detail
        self.index = None
        super(YamabeLabError, self).__init__(self._message())

    def _message(self):
        msg = self.error_msg
        if self.detail:
            msg = '{} {}'.format(msg, self.detail)
        if self.index is not None:
            msg = 'index {}: {}'.format(self.index, msg)
        return msg

    def annotate(self, index):
        """
        Tag the error with the schedule index that raised it.
        """
        self.index = index
        self.args = (self._message(),)
        return self

    def __str__(self):
        return self._message()


# GEOMETRY AND CURVATURE

class InvalidDimension(YamabeLabError):

    code = 300
    error_msg = 'The dimension must be an integer n >= 3.'


class OutOfSupport(YamabeLabError):

    code = 301
    error_msg = 'Point outside the grid support of the field.'


class NonFinite(YamabeLabError):

    code = 302
    error_msg = 'Non-finite samples in the stencil.'


class NonpositiveConformalFactor(YamabeLabError):

    code = 303
    error_msg = 'The conformal factor v must be positive.'


class PoleCollision(YamabeLabError):

    code = 304
    error_msg = 'An excised region touches the chart pole.'


# CLOSED FORMS AND SOLVER

class OutsideDomain(YamabeLabError):

    code = 400
    error_msg = 'Point outside the natural domain of the oracle.'


class InvalidDomain(YamabeLabError):

    code = 401
    error_msg = 'Invalid domain specification.'


class InvalidTube(YamabeLabError):

    code = 402
    error_msg = 'Tube dimension k must be an integer with (n-2)/2 < k <= n-2.'


class NewtonDiverged(YamabeLabError):

    code = 403
    error_msg = 'Newton iteration failed to reduce the residual.'


class BracketViolation(YamabeLabError):

    code = 404
    error_msg = 'The solution left the sub/supersolution bracket.'


class BracketOrderViolation(YamabeLabError):

    code = 405
    error_msg = 'The subsolution exceeds the supersolution.'


class NonConvergence(YamabeLabError):

    code = 406
    error_msg = 'Monotone sweep stalled before convergence.'


class AxisSingularity(YamabeLabError):

    code = 407
    error_msg = 'Non-finite values produced at the symmetry axis.'


# EXHAUSTION AND PROBES

class NonMonotoneSchedule(YamabeLabError):

    code = 500
    error_msg = 'Schedule radii must decrease along the index.'


class OverlappingExclusions(YamabeLabError):

    code = 501
    error_msg = 'Excised regions must be pairwise disjoint.'


class DegenerateBasis(YamabeLabError):

    code = 502
    error_msg = 'The fit basis is numerically degenerate.'


class PathOutsideDomain(YamabeLabError):

    code = 503
    error_msg = 'The probe path does not stay in the solved domain.'


class InterpolationFailure(YamabeLabError):

    code = 504
    error_msg = 'Interpolation hit non-finite samples.'


class RadiusTooSmall(YamabeLabError):

    code = 505
    error_msg = 'Arc radius must be at least four times the chord.'


# PERSISTENCE AND COMMAND LINE

class DecodeError(YamabeLabError):

    code = 600
    error_msg = 'Error decoding the field record.'


class EncodeError(YamabeLabError):

    code = 601
    error_msg = 'Error encoding the field record.'


class VersionMismatch(DecodeError):

    code = 602
    error_msg = 'Field record written by another format version.'


class SchemaError(YamabeLabError):

    code = 603
    error_msg = 'Invalid scenario:'
    exit_code = cfg.EXIT_MISSING

    def __init__(self, violations):
        self.violations = list(violations)
        detail = '; '.join(
            '{}: {}'.format(path, reason) for path, reason in self.violations)
        super(SchemaError, self).__init__(detail)


class IoError(YamabeLabError):

    code = 604
    error_msg = 'Error reading or writing output files.'
    exit_code = cfg.EXIT_MISSING


class MissingReport(YamabeLabError):

    code = 605
    error_msg = 'No run report found.'
    exit_code = cfg.EXIT_MISSING
