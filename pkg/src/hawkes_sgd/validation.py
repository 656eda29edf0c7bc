"""Input validation helpers.

These mirror the scikit-learn convention of doing all argument checking up
front and raising informative errors, so the estimator surface can stay thin.
"""

import numbers

import numpy as np

from .exceptions import ValidationError


def check_event_stream(times, name="times"):
    """Coerce one stream of jump times to a float64 array and validate it.

    The stream must be one-dimensional, finite, strictly increasing and
    strictly positive (orderliness: no duplicate timestamps within a type).
    """
    arr = np.asarray(times, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    if arr.size and arr[0] <= 0.0:
        raise ValidationError(f"{name} must be strictly positive (first value {arr[0]!r})")
    if arr.size > 1 and not np.all(np.diff(arr) > 0.0):
        raise ValidationError(f"{name} must be strictly increasing (duplicate or unsorted timestamps)")
    return np.ascontiguousarray(arr)


def check_events(events, horizon=None):
    """Validate a list of event streams and resolve the observation horizon.

    Parameters
    ----------
    events : sequence of array-like
        One strictly increasing array of jump times per event type.
    horizon : float, optional
        Observation window end. Defaults to the latest observed time.

    Returns
    -------
    streams : list of ndarray
    horizon : float
    """
    if isinstance(events, np.ndarray) and events.ndim == 1:
        events = [events]
    streams = [check_event_stream(t, name=f"times[{i}]") for i, t in enumerate(events)]
    if not streams:
        raise ValidationError("need at least one event stream")
    t_last = max((s[-1] for s in streams if s.size), default=0.0)
    if horizon is None:
        horizon = t_last
    horizon = float(horizon)
    if horizon <= 0.0:
        raise ValidationError(f"horizon must be positive, got {horizon!r}")
    if t_last > horizon:
        raise ValidationError(f"events extend past the horizon ({t_last} > {horizon})")
    return streams, horizon


def check_seed(random_state):
    """Normalize a seed argument to a plain int usable as SeedSequence entropy."""
    if random_state is None:
        return int(np.random.SeedSequence().entropy % (2**63))
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(0, 2**63))
    raise ValidationError(f"random_state must be None, an int or a Generator, got {type(random_state)!r}")


def require_fitted(obj, attribute="fit_record_"):
    """Raise unless `obj` carries the given post-fit attribute."""
    if getattr(obj, attribute, None) is None:
        raise ValidationError(f"{type(obj).__name__} is not fitted yet; call fit() first")
