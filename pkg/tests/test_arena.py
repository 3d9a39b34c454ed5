import json
from collections import Counter

import pytest

from persuade_sdg.arena import (
    AgentSpec,
    Framework,
    MatchPlan,
    SampleExceedsPool,
    UnknownGame,
    extract_dataset,
    instance_pool,
    load_pool,
    plan_selfplay,
    plan_tournament,
    read_logs,
    read_report,
    run_match,
    run_plans,
    run_team_eval,
    run_tournament,
    save_pool,
    seats,
    write_logs,
    write_report,
)
from replays import WEREWOLF_ROLES

FIRST = AgentSpec("first", script="first")
LAST = AgentSpec("last", script="last")
STUBS = [{"kind": "stub", "name": n} for n in ("alpha", "beta", "gamma")]

# independent role -> team table for hand tallies
TEAM_OF = {
    "werewolf": {"Werewolf": "werewolf", "Seer": "village", "Guardian": "village", "Villager": "village"},
    "avalon": {"Merlin": "good", "Servant": "good", "Minion": "evil", "Assassin": "evil"},
    "onuw": {"Werewolf": "werewolf", "Villager": "village", "Seer": "village", "Robber": "village",
             "Troublemaker": "village", "Insomniac": "village"},
}


def _speeches(*ids):
    return [("speech", p) for p in ids]


def test_scripted_werewolf_match_by_hand():
    # "first" picks the lowest legal option everywhere: wolves and guardian both
    # choose Player 1 on night 1 (saved), then every voter names the lowest
    # other survivor, so Players 1, 2 and 3 fall on days 1-3 and two wolves
    # face two villagers.
    log = run_match(MatchPlan("werewolf", (FIRST,) * 7, 0, {"roles": WEREWOLF_ROLES}))
    got = [(e["kind"], e["actor"]) for e in log["events"]]
    want = (
        [("deal", None), ("night_target", 4), ("night_target", 5), ("night_probe", 2),
         ("night_protect", 6), ("announcement", None), ("discussion", None)]
        + _speeches(1, 2, 3, 4, 5, 6, 7)
        + [("vote", None), ("elimination", None), ("nightfall", None),
           ("night_target", 4), ("night_target", 5), ("night_probe", 2), ("night_protect", 6),
           ("announcement", None), ("discussion", None)]
        + _speeches(2, 3, 4, 5, 6, 7)
        + [("vote", None), ("elimination", None), ("nightfall", None),
           ("night_target", 4), ("night_target", 5), ("night_protect", 6),
           ("announcement", None), ("discussion", None)]
        + _speeches(3, 4, 5, 6, 7)
        + [("vote", None), ("elimination", None), ("victory", None)]
    )
    assert got == want
    ev = log["events"]
    assert [e["payload"]["target"] for e in ev if e["kind"] == "night_target"] == [1, 1, 2, 2, 3, 3]
    assert [e["payload"]["target"] for e in ev if e["kind"] == "night_probe"] == [1, 3]
    assert [e["payload"]["target"] for e in ev if e["kind"] == "night_protect"] == [1, 2, 3]
    assert [e["payload"]["eliminated"] for e in ev if e["kind"] == "announcement"] == [None, None, None]
    assert [e["payload"]["player"] for e in ev if e["kind"] == "elimination"] == [1, 2, 3]
    assert ev[14]["payload"]["ballots"] == {"1": 2, "2": 1, "3": 1, "4": 1, "5": 1, "6": 1, "7": 1}
    assert log["outcome"] == {"winner": "werewolf", "rounds": 3, "reason": "win_condition"}
    assert not log["aborted"]


def test_same_plan_same_log():
    spec = AgentSpec("r", Framework.RANDOM)
    for game in ("werewolf", "avalon", "onuw"):
        plan = MatchPlan(game, (spec,) * seats(game), 11)
        assert json.dumps(run_match(plan)) == json.dumps(run_match(plan))


def test_failing_agent_aborts_match():
    def broken(kind, options, view):
        if kind == "day_vote":
            raise RuntimeError("lost connection")
        return options[0]

    log = run_match(MatchPlan("werewolf", (AgentSpec("x", script=broken),) * 7, 0))
    assert log["aborted"] and "lost connection" in log["error"] and log["outcome"] is None


def test_illegal_choice_aborts_match():
    log = run_match(MatchPlan("avalon", (AgentSpec("x", script=lambda k, o, v: "nonsense"),) * 5, 0))
    assert log["aborted"] and "illegal" in log["error"]


def test_round_cap_aborts_stalled_werewolf():
    # nobody ever dies: wolves and guardian both pick the lowest player and
    # votes form a cycle, which ties under the no-elimination rule
    def stall(kind, options, view):
        if kind == "day_vote":
            later = [p for p in options if p > view.viewer]
            return later[0] if later else options[0]
        return options[0]

    roles = dict(WEREWOLF_ROLES)
    log = run_match(MatchPlan("werewolf", (AgentSpec("s", script=stall),) * 7, 0,
                              {"roles": roles, "tie_rule": "no-elimination"}))
    assert log["aborted"] and log["error"] is None
    assert log["outcome"] == {"winner": None, "rounds": 21, "reason": "round_cap_abort"}


def test_unknown_game_and_seat_count():
    with pytest.raises(UnknownGame):
        seats("chess")
    with pytest.raises(ValueError):
        MatchPlan("avalon", (FIRST,) * 4, 0)


def test_log_contract_fields():
    log = run_match(plan_selfplay("onuw", 1, STUBS, 0)[0])
    assert {"match_id", "game", "seed", "players", "events", "turns", "outcome"} <= set(log)
    assert {"id", "role", "agent"} <= set(log["players"][0])
    turn = log["turns"][0]
    assert {"t", "speaker", "u_base", "u_final", "intent"} <= set(turn)
    assert set(turn["intent"]) >= {"desired", "undesired"}
    assert set(log["outcome"]) == {"winner", "rounds", "reason"}
    assert [t["t"] for t in log["turns"]] == list(range(1, len(log["turns"]) + 1))


def test_refined_agent_speaks_through_refiner():
    spec = AgentSpec("ref", Framework.REFINED, backend=STUBS[0], refiner=STUBS[1])
    log = run_match(MatchPlan("avalon", (spec,) * 5, 2, record_intents=True))
    assert not log["aborted"]
    for t in log["turns"]:
        assert t["u_final"].startswith(t["u_base"]) and t["u_final"] != t["u_base"]


# --- self-play sampling and extraction -----------------------------------------------
def test_backend_seat_frequency():
    plans = plan_selfplay("werewolf", 1429, STUBS, 5)
    counts = Counter(spec.backend["name"] for p in plans for spec in p.agents)
    total = sum(counts.values())
    assert total == 1429 * 7
    for name in ("alpha", "beta", "gamma"):
        assert abs(counts[name] / total - 1 / 3) <= 0.02


def test_zero_matches():
    assert plan_selfplay("avalon", 0, STUBS, 0) == []


@pytest.fixture(scope="module")
def selfplay_logs():
    return run_plans(plan_selfplay("werewolf", 4, STUBS, 1))


def test_full_sample_is_a_permutation(selfplay_logs):
    pool, _ = instance_pool(selfplay_logs)
    got = extract_dataset(selfplay_logs, len(pool), seed=2)
    key = lambda i: json.dumps(i.to_dict(), sort_keys=True)
    assert sorted(map(key, got)) == sorted(map(key, pool))


def test_extraction_is_seeded(selfplay_logs):
    a = extract_dataset(selfplay_logs, 10, seed=3)
    b = extract_dataset(selfplay_logs, 10, seed=3)
    assert [i.to_dict() for i in a] == [i.to_dict() for i in b]
    assert len({(i.seed, i.turn) for i in a}) == 10


def test_sample_exceeds_pool(selfplay_logs):
    pool, _ = instance_pool(selfplay_logs)
    with pytest.raises(SampleExceedsPool):
        extract_dataset(selfplay_logs, len(pool) + 1)


def test_aborted_logs_give_no_instances(selfplay_logs):
    bad = dict(selfplay_logs[0], aborted=True)
    assert instance_pool([bad]) == ([], 0)


def test_workers_do_not_change_logs():
    plans = plan_selfplay("avalon", 4, STUBS, 9)
    assert run_plans(plans, workers=1) == run_plans(plans, workers=2)


def test_log_file_round_trip(tmp_path, selfplay_logs):
    path = tmp_path / "logs.jsonl"
    write_logs(path, selfplay_logs)
    assert read_logs(path) == json.loads(json.dumps(selfplay_logs))


# --- tournaments -----------------------------------------------------------------------
def _hand_tally(game, logs):
    part, wins = Counter(), Counter()
    for log in logs:
        if log["aborted"]:
            continue
        winner = log["outcome"]["winner"]
        for p in log["players"]:
            team = TEAM_OF[game][p["final_role"]]
            part[(p["agent"], team)] += 1
            wins[(p["agent"], team)] += team == winner
    return part, wins


@pytest.mark.parametrize("game", ["werewolf", "avalon", "onuw"])
def test_tournament_matches_hand_tally(game):
    logs = []
    report = run_tournament([FIRST, LAST], game, matches=10, seed=4, logs_out=logs)
    part, wins = _hand_tally(game, logs)
    for agent in ("first", "last"):
        for team, stats in report.stats[agent].items():
            assert stats.participation == part[(agent, team)]
            assert stats.wins == wins[(agent, team)]
    assert report.matches + report.aborted == 10
    assert report.total_participation() == report.matches * seats(game)


def test_single_agent_conservation():
    report = run_tournament([FIRST], "avalon", matches=6, seed=0)
    assert report.overall("first").participation == 6 * 5
    s = report.stats["first"]
    # wins are counted per seat: three good seats, two evil
    assert s["good"].wins // 3 + s["evil"].wins // 2 == 6


def test_tournament_is_reproducible():
    a = run_tournament([FIRST, LAST], "onuw", matches=8, seed=7)
    b = run_tournament([FIRST, LAST], "onuw", matches=8, seed=7, workers=2)
    assert a.to_dict() == b.to_dict()


def test_plan_tournament_draws_with_replacement():
    plans = plan_tournament([FIRST, LAST], "werewolf", 200, 1)
    c = Counter(a.id for p in plans for a in p.agents)
    assert abs(c["first"] / (200 * 7) - 0.5) < 0.03


def test_report_round_trip(tmp_path):
    report = run_tournament([FIRST, LAST], "werewolf", matches=5, seed=0)
    write_report(tmp_path / "r.json", report)
    back = read_report(tmp_path / "r.json")
    assert back.to_dict() == report.to_dict()
    assert "Team Village" in json.loads((tmp_path / "r.json").read_text())["table"]


def test_pool_round_trip(tmp_path):
    pool = [FIRST, AgentSpec("v", Framework.VANILLA, backend=STUBS[0]),
            AgentSpec("r", Framework.REFINED, backend=STUBS[1], refiner={"kind": "toy", "checkpoint": "x.json"})]
    save_pool(tmp_path / "p.json", pool)
    assert load_pool(tmp_path / "p.json") == pool


def test_pool_errors(tmp_path):
    (tmp_path / "dup.json").write_text(json.dumps({"agents": [{"id": "a"}, {"id": "a"}]}))
    with pytest.raises(ValueError):
        load_pool(tmp_path / "dup.json")
    with pytest.raises(ValueError):
        AgentSpec("r", Framework.REFINED, backend=STUBS[0])
    with pytest.raises(ValueError):
        AgentSpec.from_dict({"id": "a", "colour": "red"})


def test_team_eval_mirror():
    # identical agents on both sides: the two side runs replay the same matches
    spec = AgentSpec("r", Framework.RANDOM)
    village = run_team_eval(spec, spec, "werewolf", "village", matches=12, seed=3)
    wolves = run_team_eval(spec, spec, "werewolf", "werewolf", matches=12, seed=3)
    assert village.matches == wolves.matches
    assert village.wins + wolves.wins == village.matches
    assert village.participation["variant"] == wolves.participation["opponent"]


def test_team_eval_seats_follow_the_deal():
    res = run_team_eval(FIRST, LAST, "avalon", "good", matches=5, seed=0)
    assert res.participation == {"variant": 15, "opponent": 10}
    with pytest.raises(ValueError):
        run_team_eval(FIRST, LAST, "avalon", "village")
