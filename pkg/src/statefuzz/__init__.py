"""Stateful greybox protocol fuzzing.

The fuzzing loop schedules states of an inferred protocol state machine,
splits seeds around the chosen state and mutates the middle part with either
classical byte-level operators or operators confined to learned message
fields.
"""

from statefuzz.campaign import CampaignConfig, CampaignResult, CrashRecord, Fuzzer, replay, run_campaign
from statefuzz.feedback import CoverageMap, ExecOutcome, GlobalCoverage, StateId, is_interesting
from statefuzz.grammar import MatchReport, OfflineClient, accuracy, classify_fields, learn_grammar
from statefuzz.message import FieldSpec, Grammar, Seed, load_corpus, load_grammar, read_field, write_field
from statefuzz.state_model import StateModel
from statefuzz.varminer import FilterConfig, calibrate, filter_vars

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig", "CampaignResult", "CrashRecord", "Fuzzer", "replay", "run_campaign",
    "CoverageMap", "ExecOutcome", "GlobalCoverage", "StateId", "is_interesting",
    "MatchReport", "OfflineClient", "accuracy", "classify_fields", "learn_grammar",
    "FieldSpec", "Grammar", "Seed", "load_corpus", "load_grammar", "read_field", "write_field",
    "StateModel",
    "FilterConfig", "calibrate", "filter_vars",
]
