"""Shared exception types, mapped onto CLI exit codes in cli.py."""


class ContractError(ValueError):
    """A caller violated an operation's contract (bad arguments, missing
    upstream file, degenerate input). CLI exit code 2."""


class LoadError(ContractError):
    """A resource file (lexicon, gazetteer, roster, dataset) failed
    validation at load time."""


class TransportError(RuntimeError):
    """The inference sidecar was unreachable or violated the protocol."""

    def __init__(self, message: str, batch_id: str | None = None):
        super().__init__(message)
        self.batch_id = batch_id
