"""Two-context front end: optimization in a worker, prediction on demand.

The worker consumes queued radar frames and runs the window solve.  After
each solve it publishes an immutable snapshot of the newest state.  Callers
on any thread read the snapshot and integrate IMU samples forward from it;
neither call waits for an optimization in progress.  With ``threaded=False``
frames are processed synchronously on the caller's thread, which is the
deterministic mode.
"""

from __future__ import annotations

import queue
import threading

from brio.estimator.core import Estimator, predict
from brio.estimator.graph import EstimatorError
from brio.types import BaroSample, NavState, RadarFrame

_STOP = object()


class OnlineEstimator:
    """Wrap an initialized :class:`Estimator` for online use."""

    def __init__(self, estimator: Estimator, threaded: bool = False, on_frame=None):
        if not estimator.initialized:
            raise EstimatorError("initialize the estimator before going online")
        self.estimator = estimator
        self.threaded = threaded
        self.on_frame = on_frame
        self._lock = threading.Lock()
        self._snapshot = estimator.latest_state
        self._error: BaseException | None = None
        self._queue: queue.Queue | None = None
        self._worker: threading.Thread | None = None
        if threaded:
            self._queue = queue.Queue()
            self._worker = threading.Thread(target=self._run, name="brio-optimizer", daemon=True)
            self._worker.start()

    # -- optimization context ---------------------------------------------------

    def _process(self, frame, imu_between, baro) -> None:
        state = self.estimator.process(frame, imu_between, baro)
        with self._lock:
            if state.stamp > self._snapshot.stamp:
                self._snapshot = state
        if self.on_frame is not None:
            self.on_frame(self.estimator.results[-1])

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            try:
                if item is _STOP:
                    return
                if self._error is None:
                    self._process(*item)
            except BaseException as exc:  # surfaced by close()
                self._error = exc
            finally:
                self._queue.task_done()

    def submit(self, frame: RadarFrame, imu_between, baro: BaroSample | None = None) -> None:
        """Queue a frame (threaded) or process it now (single-threaded)."""
        if self._error is not None:
            raise self._error
        if self.threaded:
            self._queue.put((frame, imu_between, baro))
        else:
            self._process(frame, imu_between, baro)

    def wait(self) -> None:
        """Block until every queued frame has been processed; re-raise failures."""
        if self.threaded:
            self._queue.join()
        if self._error is not None:
            raise self._error

    def close(self) -> None:
        if self.threaded and self._worker.is_alive():
            self._queue.put(_STOP)
            self._worker.join()
        if self._error is not None:
            raise self._error

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        elif self.threaded and self._worker.is_alive():
            self._queue.put(_STOP)
            self._worker.join()
        return False

    # -- prediction context -------------------------------------------------------

    def snapshot(self) -> NavState:
        """Newest optimized state; its stamp never decreases."""
        with self._lock:
            return self._snapshot

    def predict(self, imu_since) -> NavState:
        """Integrate ``imu_since`` from the snapshot stamp to its last sample."""
        base = self.snapshot()
        return predict(base, imu_since, self.estimator.calibration.gravity, self.estimator.config.integration_scheme)
