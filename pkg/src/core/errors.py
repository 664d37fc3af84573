# src/core/errors.py


class LabError(Exception):
    """Raíz de los errores del laboratorio; la capa HTTP la traduce a 422."""


class DomainError(LabError):
    """Geometría degenerada o fuente mal colocada respecto de ∂Ω."""


class PreconditionError(LabError):
    """Se violó la precondición de una operación (r <= 0, CFL, rejillas incompatibles...)."""


class ConfigError(LabError):
    """Configuración de experimento inválida."""


class StorageError(LabError):
    """Contenedor binario ilegible o ruta de salida no escribible."""
