import numpy as np
import pytest

from app.server.handler.exceptions import InvalidInputError
from app.server.models.campaign import BaselineSpec
from app.server.models.record import EvaluationRecord, TracePoint
from app.server.models.space import Configuration
from app.server.services import space as space_service
from app.server.services import store
from app.server.static.enums import Direction, EvalStatus


def _record(cfg: Configuration, eval_id: int, objective: float, status: EvalStatus = EvalStatus.OK, finished_at: float = None) -> EvaluationRecord:
    finished = float(eval_id + 1) if finished_at is None else finished_at
    return EvaluationRecord(eval_id=eval_id, worker_id=eval_id % 4, config=cfg, objective=objective, status=status, elapsed=1.0, started_at=finished - 1.0, finished_at=finished)


@pytest.mark.parametrize(
    'baseline, best, expected',
    [(483033, 562288, 16.41), (629647, 706535, 12.21), (724098, 803931, 11.03), (777287, 875419, 12.62), (823997, 930078, 12.87)],
)
def test_fom_improvements_over_baseline(baseline, best, expected):
    assert store.improvement_percent(BaselineSpec(objective=baseline, direction=Direction.MAXIMIZE), best) == expected


def test_runtime_improvement_is_a_reduction():
    assert store.improvement_percent(BaselineSpec(objective=100.0, direction=Direction.MINIMIZE), 83.0) == 17.0


@pytest.mark.parametrize('direction', list(Direction))
def test_matching_the_baseline_is_no_improvement(direction):
    assert store.improvement_percent(BaselineSpec(objective=42.5, direction=direction), 42.5) == 0.0


def test_improvement_rejects_degenerate_baselines():
    with pytest.raises(ValueError):
        store.improvement_percent(BaselineSpec(objective=0.0), 1.0)
    with pytest.raises(ValueError):
        store.improvement_percent(BaselineSpec(objective=-5.0, direction=Direction.MAXIMIZE), 1.0)


def test_results_round_trip_with_inactive_values(tmp_path, openmc_space):
    rng = np.random.default_rng(5)
    statuses = list(EvalStatus)
    records = [_record(space_service.sample(openmc_space, rng), i, float(rng.normal(1e5, 1e4)), statuses[i % 3]) for i in range(256)]
    path = tmp_path / 'results.csv'
    with store.ResultsStore(path, openmc_space) as results:
        for record in records:
            results.append_record(record)

    assert path.read_text().splitlines()[0] == 'P0,P1,P2,P3,P4,P5,P6,objective,status,elapsed_sec,worker_id,eval_id,started_at,finished_at'
    assert ',nan,' in path.read_text()
    assert store.read_records(path, openmc_space) == records


def test_untyped_read_keeps_text_values(tmp_path, openmc_space, openmc_defaults):
    path = tmp_path / 'results.csv'
    queueless = Configuration(values={**openmc_defaults.values, 'P0': 'openmc-queueless', 'P3': None})
    with store.ResultsStore(path, openmc_space) as results:
        results.append_record(_record(queueless, 0, 1.5))
    (record,) = store.read_records(path)
    assert record.config['P1'] == '1000000'
    assert record.config['P3'] is None


def test_reopened_store_continues_eval_ids(tmp_path, openmc_space, openmc_defaults):
    path = tmp_path / 'results.csv'
    with store.ResultsStore(path, openmc_space) as results:
        results.append_record(_record(openmc_defaults, 0, 1.0))
        results.append_record(_record(openmc_defaults, 1, 2.0))
    with store.ResultsStore(path, openmc_space) as results:
        assert results.next_eval_id == 2
        with pytest.raises(ValueError):
            results.append_record(_record(openmc_defaults, 1, 3.0))
        results.append_record(_record(openmc_defaults, 2, 3.0))
    assert [record.eval_id for record in store.read_records(path, openmc_space)] == [0, 1, 2]
    assert path.read_text().count('objective,status') == 1


def test_reproducible_timestamps_write_zero_times(tmp_path, openmc_space, openmc_defaults):
    path = tmp_path / 'results.csv'
    with store.ResultsStore(path, openmc_space, reproducible_timestamps=True) as results:
        results.append_record(_record(openmc_defaults, 0, 0.1))
    assert path.read_text().splitlines()[1].endswith(',0.1,ok,0.000,0,0,0.000,0.000')


@pytest.mark.parametrize(
    'content',
    ['', 'P0,objective\nopenmc,1.0\n', 'P0,objective,status,elapsed_sec,worker_id,eval_id,started_at,finished_at\nopenmc,abc,ok,1,0,0,0,1\n'],
)
def test_malformed_results_are_invalid_input(tmp_path, content):
    path = tmp_path / 'results.csv'
    path.write_text(content)
    with pytest.raises(InvalidInputError):
        store.read_records(path)


def test_missing_results_are_invalid_input(tmp_path):
    with pytest.raises(InvalidInputError):
        store.read_records(tmp_path / 'absent.csv')


def test_header_must_match_the_space(tmp_path, openmc_space, openmc_like):
    path = tmp_path / 'results.csv'
    with store.ResultsStore(path, openmc_like.space):
        pass
    with pytest.raises(InvalidInputError):
        store.read_records(path, openmc_space)


def test_best_record_prefers_the_earliest_tie(openmc_defaults):
    records = [_record(openmc_defaults, 0, 5.0), _record(openmc_defaults, 1, 3.0), _record(openmc_defaults, 2, 3.0), _record(openmc_defaults, 3, 1.0, EvalStatus.TIMEOUT)]
    assert store.best_record(records, Direction.MINIMIZE).eval_id == 1
    assert store.best_record(records, Direction.MAXIMIZE).eval_id == 0
    assert store.best_record(records[3:], Direction.MINIMIZE) is None
    assert store.status_counts(records) == {'ok': 3, 'timeout': 1, 'fail': 0}


def test_trace_follows_finish_order(openmc_defaults):
    records = [_record(openmc_defaults, 0, 3.0, finished_at=9.0), _record(openmc_defaults, 1, 2.0, finished_at=4.0), _record(openmc_defaults, 2, 1.0, finished_at=4.0)]
    series = store.export_trace(records, BaselineSpec(objective=7.0))
    assert [(point.t_sec, point.objective) for point in series] == [(4.0, 2.0), (4.0, 1.0), (9.0, 3.0), (0.0, 7.0)]
    assert series[-1].status == 'baseline'


def test_empty_trace_has_no_baseline_row():
    assert store.export_trace([], BaselineSpec(objective=7.0)) == []


def test_incumbent_never_worsens():
    trace = [TracePoint(t_sec=float(t), objective=value, status=status) for t, (value, status) in enumerate([(5.0, 'ok'), (9.0, 'ok'), (1.0, 'timeout'), (3.0, 'ok'), (4.0, 'ok')])]
    assert [point.objective for point in store.incumbent_series(trace, Direction.MINIMIZE)] == [5.0, 5.0, 3.0, 3.0]
    assert [point.objective for point in store.incumbent_series(trace, Direction.MAXIMIZE)] == [5.0, 9.0, 9.0, 9.0]


def test_trace_file_round_trips(tmp_path):
    series = [TracePoint(t_sec=1.25, objective=562288.0, status='ok'), TracePoint(t_sec=0.0, objective=483033.0, status='baseline')]
    store.write_trace(tmp_path / 'trace.csv', series)
    assert (tmp_path / 'trace.csv').read_text().splitlines()[0] == 't_sec,objective,status'
    assert store.read_trace(tmp_path / 'trace.csv') == series
