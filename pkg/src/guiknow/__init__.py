"""Knowledge-guided exploration of GUI apps.

The engine observes UI states, folds them into abstract states and
abstract actions, keeps an interaction graph between them, and uses
that graph to reach unexplored actions anywhere in the app. An LLM
(or a deterministic stand-in) groups same-function elements and writes
text for input fields.
"""

from .explorer import (ExplorationAborted, ExplorationResult, Explorer, ExplorerConfig, NavigationError,
                       explore_main, find_navigate_path, repair_navigation, select_explore_action)
from .knowledge import (AbstractAction, AbstractState, InteractionGraph, Knowledge, export_graph,
                        load_knowledge, record_edge_failure, register_abstract_state, update_knowledge)
from .llm import HeuristicBackend, RemoteBackend, ScriptedBackend, TokenLedger
from .sim import MockEnv, load_app, load_app_spec, load_fixture, run_random_baseline
from .ui import StateSignature, UiAction, UiElement, UiState, compute_state_signature, parse_snapshot

__version__ = "0.1.0"

__all__ = [
    "AbstractAction", "AbstractState", "ExplorationAborted", "ExplorationResult", "Explorer",
    "ExplorerConfig", "HeuristicBackend", "InteractionGraph", "Knowledge", "MockEnv", "NavigationError",
    "RemoteBackend", "ScriptedBackend", "StateSignature", "TokenLedger", "UiAction", "UiElement", "UiState",
    "compute_state_signature", "explore_main", "export_graph", "find_navigate_path", "load_app",
    "load_app_spec", "load_fixture", "load_knowledge", "parse_snapshot", "record_edge_failure", "register_abstract_state",
    "repair_navigation", "run_random_baseline", "select_explore_action", "update_knowledge",
]
