"""Exception types shared across the package.

The CLI maps these onto exit codes: ``InvalidInput`` and
``UnsupportedStructure`` exit with 1, ``ResourceLimit`` with 2.
"""


class HwGibbsError(Exception):
    pass


class InvalidInput(HwGibbsError, ValueError):
    pass


class ResourceLimit(HwGibbsError, RuntimeError):
    pass


class UnsupportedStructure(HwGibbsError, ValueError):
    pass
