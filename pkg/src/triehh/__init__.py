"""Federated heavy-hitter discovery with a trie, and its privacy and utility calculators."""

from .analysis import DiscoveryQuery, discovery_rate, min_population, round_probability
from .data import (
    CorpusRecord,
    IngestConfig,
    filter_oov,
    generate_synthetic,
    ingest_csv,
    ingest_jsonl,
    load_dataset,
    load_fixture,
    planted_dataset,
    save_dataset,
    zipf_table,
)
from .dataset import UserDataset
from .errors import (
    AlphabetError,
    DatasetError,
    ParameterError,
    PopulationTooSmall,
    TrieHHError,
    UnsatisfiableError,
    ValidationError,
)
from .harness import ExperimentSpec, MetricsReport, discovery_curve, run_battery
from .privacy import (
    PrivacyParams,
    choose_parameters,
    delta_from,
    epsilon_from,
    lambert_w,
    select_gamma,
    select_theta,
    theta_log_rule,
)
from .simulation import ProtocolParams, RunReport, run_multi_word, run_single_word, sample_users
from .trie import EOS, Trie, VoteTally, extract_prefixes, extract_words, grow_one_level

__version__ = "0.1.0"
