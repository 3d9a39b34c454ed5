"""Self-play generation, dataset extraction and tournament evaluation."""
from .agents import (
    SCRIPTS,
    Agent,
    AgentError,
    AgentSpec,
    Framework,
    LanguageAgent,
    PolicyCache,
    RandomAgent,
    ScriptedAgent,
    Speech,
    build_policy,
    load_pool,
    make_agent,
    save_pool,
)
from .match import ENGINES, RULES, TEAMS, MatchPlan, UnknownGame, engine_class, run_match, seats
from .selfplay import (
    DEFAULT_LOGS,
    DEFAULT_SAMPLE,
    SampleExceedsPool,
    extract_dataset,
    generate_selfplay,
    instance_pool,
    plan_selfplay,
    read_logs,
    run_plans,
    write_logs,
)
from .tournament import (
    DEFAULT_MATCHES,
    DEFAULT_TEAM_EVAL_MATCHES,
    TeamEvalResult,
    TeamStats,
    TournamentReport,
    plan_tournament,
    read_report,
    run_team_eval,
    run_tournament,
    tally,
    write_report,
)
