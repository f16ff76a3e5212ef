"""Python bindings for the VSL control toolkit.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (  # noqa: F401
    SPEED_GRID,
    __version__,
    attribution_summary,
    build_observation,
    debounce,
    invalid_action_set,
    max_speed_clip,
    mismatch_matrix,
    replay,
    round_up_to_ten,
    simulate,
    speed_match,
    train,
    wasserstein_distance,
)
