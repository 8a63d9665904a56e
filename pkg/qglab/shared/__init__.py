from .exceptions import (
    QGLabException, ConfigException, ParameterException, NumericalException, DomainException,
    PoleException, RootNotFoundException, ConvergenceException, ToleranceException, CFLException,
    BlowUpException, PeriodicityException, IncompatibleFieldsException,
)

__all__ = [
    "QGLabException",
    "ConfigException",
    "ParameterException",
    "NumericalException",
    "DomainException",
    "PoleException",
    "RootNotFoundException",
    "ConvergenceException",
    "ToleranceException",
    "CFLException",
    "BlowUpException",
    "PeriodicityException",
    "IncompatibleFieldsException",
]
