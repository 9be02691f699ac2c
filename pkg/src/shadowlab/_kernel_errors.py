from .errors import CapExceededError


class KernelCapError(CapExceededError):
    pass
