"""Tweet-corpus analytics: drug-mention extraction, stance analysis,
weekly trends, content clustering, demographic inference, and
association tests, as a library plus the `pulse` CLI.
"""

__version__ = "0.1.0"

from .errors import ContractError, LoadError, TransportError
from .lexicon import DrugId
from .records import FilteredCorpus, GeoPlace, TweetRecord, UserProfile
from .stance import StanceLabel
from .timeline import Wave

__all__ = [
    "__version__",
    "ContractError",
    "LoadError",
    "TransportError",
    "DrugId",
    "FilteredCorpus",
    "GeoPlace",
    "TweetRecord",
    "UserProfile",
    "StanceLabel",
    "Wave",
]
