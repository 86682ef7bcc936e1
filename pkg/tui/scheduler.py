"""Background runner that wraps verify.run_corpus()."""

import asyncio
import functools
import logging
import time

from tui.data_manager import DataManager, RunSnapshot

logger = logging.getLogger(__name__)


async def run_verify_loop(dm: DataManager, record: bool = True):
    """Run the corpus in a worker thread, then wait for a re-run request."""
    import database
    from models import RunConfig
    from verify import run_corpus

    loop = asyncio.get_event_loop()
    if record:
        await loop.run_in_executor(None, database.init_db)

    while True:
        started = time.time()
        try:
            await dm.set_status("RUNNING")
            dm.reset_run()

            # Bridge sync stage callbacks onto the event loop
            def stage_callback(stage):
                loop.call_soon_threadsafe(
                    asyncio.ensure_future,
                    dm.push_stage(stage),
                )

            run = RunConfig(
                command="dashboard", corpus=tuple(dm.corpus), n_paths=dm.n_paths,
                seed=dm.seed, workers=dm.workers,
            ).validate()
            report = await loop.run_in_executor(
                None, functools.partial(run_corpus, list(dm.corpus), run, on_stage=stage_callback)
            )

            run_id = None
            if record:
                run_id = await loop.run_in_executor(
                    None, functools.partial(database.record_run, report, "dashboard", list(dm.corpus))
                )
                await dm.update_history(await loop.run_in_executor(None, database.get_runs))

            await dm.update_run(RunSnapshot(
                timestamp=time.time(),
                corpus=list(dm.corpus),
                counts=report.counts(),
                duration=time.time() - started,
                run_id=run_id,
            ))

        except Exception as e:
            logger.error(f"Run error: {e}", exc_info=True)
            await dm.update_run(RunSnapshot(timestamp=time.time(), corpus=list(dm.corpus), error=str(e)))

        # Idle until a re-run is requested
        dm.force_run.clear()
        await dm.force_run.wait()
