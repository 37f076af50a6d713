from .core import (
    SchemaMismatch,
    Bus,
    BusError,
    NotWritable,
    Parameter,
    ServiceSpec,
    ServiceTimeout,
    Subscription,
    TopicSpec,
    TypeMismatch,
    UnknownParameter,
    UnknownService,
    UnknownTopic,
)

__all__ = [
    "SchemaMismatch",
    "Bus",
    "BusError",
    "NotWritable",
    "Parameter",
    "ServiceSpec",
    "ServiceTimeout",
    "Subscription",
    "TopicSpec",
    "TypeMismatch",
    "UnknownParameter",
    "UnknownService",
    "UnknownTopic",
]
