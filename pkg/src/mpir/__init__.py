"""Multi-message private information retrieval with scalar-linear queries.

A user fetches D of K replicated messages from N = D+1 servers without any
server learning which messages were wanted.  The package provides the exact
rational analysis (selection probabilities, download rate, capacity bounds),
the randomized retrieval protocol over a prime field, an exhaustive privacy
auditor, and a small TCP client/server embodiment.
"""
from .params import Params
from .plan import RowId
from .prob import ProbTable, RateReport, achievable_rate, build_prob_table, rate_report
from .protocol import MessageStore, QuerySet, Transcript, run_round

__all__ = [
    "MessageStore",
    "Params",
    "ProbTable",
    "QuerySet",
    "RateReport",
    "RowId",
    "Transcript",
    "achievable_rate",
    "build_prob_table",
    "rate_report",
    "run_round",
]

__version__ = "0.1.0"
