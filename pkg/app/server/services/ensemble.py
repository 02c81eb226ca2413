import math
import time
from collections import deque
from typing import Optional

import anyio
from anyio.streams.memory import MemoryObjectReceiveStream, MemoryObjectSendStream

from app.server.handler.exceptions import CampaignAbortedError, SpaceExhaustedError, StoreWriteError
from app.server.logger.custom_logger import logger
from app.server.models.campaign import BaselineSpec, CampaignConfig
from app.server.models.generic import BaseModel
from app.server.models.record import CampaignResult, EvaluationOutcome, EvaluationRecord, ProgressSnapshot
from app.server.models.space import Configuration, ParameterSpace
from app.server.services import space as space_service
from app.server.services import store as store_service
from app.server.services.harness import Evaluator
from app.server.services.optimizer import Optimizer, to_internal
from app.server.services.store import ResultsStore
from app.server.static import constants, localization
from app.server.static.enums import Direction, EvalStatus, StopReason


class Job(BaseModel):
    eval_id: int
    config: Configuration


class Completion(BaseModel):
    worker_id: int
    job: Job
    started_at: float
    finished_at: float
    outcome: Optional[EvaluationOutcome] = None
    error: Optional[BaseException] = None


def progress_snapshot(records: list[EvaluationRecord], direction: Direction, elapsed_total: float) -> ProgressSnapshot:
    """Completed count, incumbent among ok records and time spent so far"""
    best = store_service.best_record(records, direction)
    return ProgressSnapshot(
        n_done=len(records),
        best_objective=best.objective if best else None,
        best_config=best.config if best else None,
        elapsed_total=round(elapsed_total, 3),
        status_counts=store_service.status_counts(records),
    )


class Ensemble:
    """
    One manager and `n_workers` worker tasks.

    The manager owns the optimizer and the results store: it asks one configuration per idle worker,
    and on every completion tells the result, appends the record and hands that worker the next ask.
    Workers only evaluate; they never touch shared state. Forest fits run in a thread so workers
    keep streaming results while the manager computes the next ask.
    """

    def __init__(
        self,
        space: ParameterSpace,
        evaluator: Evaluator,
        campaign: CampaignConfig,
        store: Optional[ResultsStore] = None,
        prior: list[EvaluationRecord] = None,
    ) -> None:
        self.space = space
        self.evaluator = evaluator
        self.campaign = campaign
        self.store = store
        self.optimizer = Optimizer(space, campaign.optimizer_settings())
        self.records: list[EvaluationRecord] = []
        self.first_eval_id = store.next_eval_id if store is not None else 0
        self._start = 0.0
        self._abort: Optional[BaseException] = None
        prior = prior or []
        for record in prior:
            self.optimizer.observe(record.config, record.objective, record.status)
        self.n_prior = len(prior)
        # max_evals counts the records of the run being resumed
        self.budget = max(campaign.max_evals - self.n_prior, 0)

    def clock(self) -> float:
        return round(time.monotonic() - self._start, 3)

    def snapshot(self) -> ProgressSnapshot:
        return progress_snapshot(self.records, self.campaign.direction, time.monotonic() - self._start)

    async def run(self) -> CampaignResult:
        """
        Raises:
            CampaignAbortedError: When an evaluator or the store fails; holds the records already flushed.
        """
        campaign = self.campaign
        self._start = time.monotonic()
        stop_reason = StopReason.COMPLETED
        logger.info(f'campaign start: {self.budget} evaluations ({self.n_prior} already done) on {campaign.n_workers} workers, direction={campaign.direction.value}')

        result_sender, result_receiver = anyio.create_memory_object_stream[Completion](max_buffer_size=campaign.n_workers)
        job_senders: list[MemoryObjectSendStream[Job]] = []
        async with anyio.create_task_group() as workers, result_receiver:
            for worker_id in range(campaign.n_workers):
                job_sender, job_receiver = anyio.create_memory_object_stream[Job](max_buffer_size=1)
                job_senders.append(job_sender)
                workers.start_soon(self._worker, worker_id, job_receiver, result_sender.clone())
            result_sender.close()

            idle = deque(range(campaign.n_workers))
            dispatched = in_flight = 0
            stopping = False
            while True:
                while idle and not stopping and dispatched < self.budget:
                    if campaign.wall_clock_budget is not None and time.monotonic() - self._start >= campaign.wall_clock_budget:
                        stop_reason, stopping = StopReason.WALL_CLOCK, True
                        logger.warning(f'wall-clock budget of {campaign.wall_clock_budget:g}s spent; no further dispatches')
                        break
                    try:
                        cfg = await anyio.to_thread.run_sync(self.optimizer.ask)
                    except SpaceExhaustedError:
                        stop_reason, stopping = StopReason.EXHAUSTED, True
                        logger.warning(f'{localization.EXCEPTION_SPACE_EXHAUSTED} after {dispatched} dispatches')
                        break
                    worker_id = idle.popleft()
                    job = Job(eval_id=self.first_eval_id + dispatched, config=cfg)
                    logger.bind(eval_id=job.eval_id, worker_id=worker_id).debug(f'dispatch to {campaign.worker_label(worker_id)}: {cfg.values}')
                    await job_senders[worker_id].send(job)
                    dispatched += 1
                    in_flight += 1

                if in_flight == 0:
                    break
                completion = await result_receiver.receive()
                in_flight -= 1
                idle.append(completion.worker_id)
                if not self._complete(completion):
                    stop_reason = StopReason.ABORTED
                    workers.cancel_scope.cancel()
                    break

            for job_sender in job_senders:
                job_sender.close()

        elapsed_total = time.monotonic() - self._start
        if self._abort is not None:
            logger.error(f'{localization.EXCEPTION_CAMPAIGN_ABORTED} after {len(self.records)} records: {self._abort}')
            raise CampaignAbortedError(f'{localization.EXCEPTION_CAMPAIGN_ABORTED}: {self._abort}', self.records)
        logger.info(f'campaign stop ({stop_reason.value}): {len(self.records)} records in {elapsed_total:.3f}s')
        return CampaignResult(records=self.records, stop_reason=stop_reason, elapsed_total=round(elapsed_total, 3))

    def penalized_objective(self, objective: float) -> float:
        """
        Objective recorded for a timeout or failure.

        Without an explicit `timeout_penalty`, the value is pushed past the worst ok result seen so
        far, so that crashed runs of energy or EDP campaigns never look better than real measurements.
        """
        if self.campaign.timeout_penalty is not None:
            return objective
        ok = [entry.objective for entry in self.optimizer.history if entry.status == EvalStatus.OK]
        direction = self.campaign.direction
        if not ok or to_internal(objective, direction) > max(ok):
            return objective
        worst = max(ok)
        return to_internal(worst + max(abs(worst), 1.0) * constants.FAILURE_MARGIN, direction)

    def _complete(self, completion: Completion) -> bool:
        """Tells and persists one completion; False once the campaign has to abort"""
        job = completion.job
        log = logger.bind(eval_id=job.eval_id, worker_id=completion.worker_id)
        if completion.error is not None:
            log.opt(exception=completion.error).error(f'evaluator failed: {completion.error}')
            self._abort = completion.error
            return False

        outcome = completion.outcome
        objective, status = outcome.objective, outcome.status
        if not math.isfinite(objective):
            objective, status = self.campaign.penalty, EvalStatus.FAIL
        penalized = status != EvalStatus.OK
        if penalized:
            objective = self.penalized_objective(objective)
        self.optimizer.tell(job.config, objective, status)
        record = EvaluationRecord(
            eval_id=job.eval_id,
            worker_id=completion.worker_id,
            config=job.config,
            objective=objective,
            status=status,
            elapsed=round(outcome.elapsed, 3),
            started_at=completion.started_at,
            finished_at=completion.finished_at,
        )
        if self.store is not None:
            try:
                self.store.append_record(record)
            except StoreWriteError as error:
                self._abort = error
                return False
        self.records.append(record)

        message = f'{record.status.value} objective={record.objective:.6g} elapsed={record.elapsed:.3f}s ({self.n_prior + len(self.records)}/{self.campaign.max_evals})'
        if penalized:
            log.bind(status=record.status.value).warning(f'{message} {outcome.detail}'.rstrip())
        else:
            log.bind(status=record.status.value).info(message)
        return True

    async def _worker(self, worker_id: int, jobs: MemoryObjectReceiveStream[Job], results: MemoryObjectSendStream[Completion]) -> None:
        async with jobs, results:
            async for job in jobs:
                started_at = self.clock()
                outcome, error = None, None
                try:
                    outcome = await self.evaluator.evaluate(job.config, job.eval_id)
                except Exception as exc:
                    error = exc
                await results.send(Completion(worker_id=worker_id, job=job, started_at=started_at, finished_at=self.clock(), outcome=outcome, error=error))


async def run_campaign(
    space: ParameterSpace,
    evaluator: Evaluator,
    campaign: CampaignConfig,
    store: Optional[ResultsStore] = None,
    prior: list[EvaluationRecord] = None,
) -> CampaignResult:
    """
    Runs one autotuning campaign to completion.

    Args:
        space: The parameter space to search.
        evaluator: Mold or synthetic evaluator.
        campaign: Worker count, budgets and optimizer knobs.
        store: Results database receiving each record as it finishes.
        prior: Records of an earlier run of the same campaign, used to warm-start the optimizer.
    Returns:
        Records in completion order plus the reason the campaign stopped.
    Raises:
        CampaignAbortedError: On evaluator or store failure, after flushing the records so far.
    """
    return await Ensemble(space, evaluator, campaign, store, prior).run()


async def measure_baseline(space: ParameterSpace, evaluator: Evaluator, repeats: int, direction: Direction) -> BaselineSpec:
    """
    Evaluates the default configuration `repeats` times and keeps the best ok run.

    Raises:
        ValueError: If repeats < 1 or no run finished ok.
    """
    if repeats < 1:
        raise ValueError(f'repeats must be at least 1, got {repeats}')
    default = space_service.default_configuration(space)
    outcomes = []
    for eval_id in range(repeats):
        outcome = await evaluator.evaluate(default, eval_id)
        logger.bind(eval_id=eval_id, status=outcome.status.value).info(f'baseline run {eval_id + 1}/{repeats}: {outcome.objective:.6g}')
        if outcome.status == EvalStatus.OK:
            outcomes.append(outcome)
    if not outcomes:
        raise ValueError(localization.EXCEPTION_BASELINE_FAILED)
    pick = max if direction == Direction.MAXIMIZE else min
    best = pick(outcomes, key=lambda outcome: outcome.objective)
    return BaselineSpec(
        objective=best.objective,
        provenance=f'best of {repeats} default-setting runs ({len(outcomes)} ok)',
        direction=direction,
        runtime=round(best.elapsed, 3),
    )
