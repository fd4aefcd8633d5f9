"""
Stopwatch used to record per-epoch and per-stage wall-clock times for run manifests.
"""
import time


class Timer(object):
    """Implements a stop watch with labelled laps.
    Usage:
    t = Timer()
    t.start()
    t.lap('epoch 1')  # Returns the seconds since the previous lap
    t.stop()  # Returns the total seconds
    t.laps  # list of (label, seconds) pairs
    """
    def __init__(self):
        self.started = None
        self.stopped = None
        self.laps = []
        self._last = None

    def start(self):
        """Start the timer."""
        if self.running:
            raise ValueError('Timer already running')
        self.started = time.perf_counter()
        self.stopped = None
        self.laps = []
        self._last = self.started

    def lap(self, label=''):
        """Record a lap and return its duration in seconds."""
        if not self.running:
            raise ValueError('Start the timer first')
        current_time = time.perf_counter()
        seconds = current_time - self._last
        self._last = current_time
        self.laps.append((label or 'Lap %s' % (len(self.laps) + 1), seconds))
        return seconds

    def stop(self):
        """Stop the timer and return the elapsed seconds."""
        if not self.running:
            raise ValueError('Start the timer first')
        self.stopped = time.perf_counter()
        return self.elapsed

    @property
    def elapsed(self):
        if self.started is None:
            return 0.0
        return (self.stopped if self.stopped is not None else time.perf_counter()) - self.started

    @property
    def running(self):
        """Return if the timer is running."""
        return self.started is not None and self.stopped is None

    def to_dict(self):
        return {
            'total_seconds': round(self.elapsed, 6),
            'laps': [{'label': label, 'seconds': round(seconds, 6)} for label, seconds in self.laps],
        }

    def __str__(self):
        return '\n'.join('[%s] %.3fs' % (label, seconds) for label, seconds in self.laps)
