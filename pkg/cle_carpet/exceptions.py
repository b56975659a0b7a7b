"""
Error types for CarpetLab
Every error carries a machine-readable code used by the CLI and the JSON service
"""


class CarpetLabError(Exception):
    """Base class for all CarpetLab errors"""

    code = 'CARPETLAB_ERROR'

    def __init__(self, message, code=None):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code

    def to_dict(self):
        """Serialize the error as the JSON body used on stderr and in responses"""
        return {'status': 'error', 'code': self.code, 'message': self.message}


class ConfigError(CarpetLabError, ValueError):
    """Invalid configuration or operation precondition"""
    code = 'CONFIG_ERROR'


class NoDomainLoopError(CarpetLabError):
    """No outermost boundary surrounds the origin; the caller resamples"""
    code = 'NO_DOMAIN_LOOP'


class DisconnectedError(CarpetLabError):
    """Two carpet points lie in different carpet components"""
    code = 'DISCONNECTED'


class SnapError(CarpetLabError):
    """No carpet cell within eps of a query point"""
    code = 'SNAP_FAILURE'


class DegenerateSampleError(CarpetLabError, ValueError):
    """Input data cannot support the requested estimate"""
    code = 'DEGENERATE_SAMPLE'


class AcceptanceError(CarpetLabError):
    """One or more acceptance checks failed"""
    code = 'ACCEPTANCE_FAILED'
