import numpy as np
import pytest

from respigate import PhantomConfig, SiAxis, SiOrientation, SliceSeries, SliceStack


def make_series(frames, slice_index=1, frame_interval=0.042, **kwargs):
    return SliceSeries(
        slice_index=slice_index,
        frames=np.asarray(frames, dtype=np.float64),
        frame_interval=frame_interval,
        si_axis=kwargs.get("si_axis", SiAxis.ROWS),
        si_orientation=kwargs.get("si_orientation", SiOrientation.INCREASING_INFERIOR),
    )


def make_stack(frames_list, frame_interval=0.042):
    return SliceStack(
        slices=tuple(
            make_series(f, slice_index=i + 1, frame_interval=frame_interval)
            for i, f in enumerate(frames_list)
        )
    )


@pytest.fixture(scope="session")
def small_phantom_config():
    """A quick phantom that still exercises every structure."""
    return PhantomConfig(
        n_slices=4,
        height=112,
        width=80,
        n_frames=120,
        resp_amplitude_px=4.0,
        cardiac_amplitude_px=1.5,
        noise_sigma=0.04,
        seed=11,
    )
