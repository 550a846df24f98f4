"""Training-free panorama-to-panorama translation with boundary continuity."""

from .codec import BlockAverageCodec, CodecDescriptor, make_codec
from .control import (
    GuidanceControls,
    GuidanceSpec,
    InjectionControls,
    InjectionPolicy,
    guidance_gradients,
    inject_controls,
    make_guidance_spec,
    record_source_trajectory,
)
from .denoisers import (
    Conditioning,
    ConvToyDenoiser,
    Denoiser,
    LinearGaussianDenoiser,
    ZeroEpsDenoiser,
    make_denoiser,
    null_conditioning,
    prompt_conditioning,
)
from .errors import (
    CoverageError,
    InjectionError,
    PantError,
    RawFormatError,
    StageError,
    ValidationError,
)
from .evalkit import (
    SeamReport,
    halves_discrepancy,
    seam_metric,
    sweep,
    synth_panorama,
    synth_ramp,
)
from .geometry import ExtendSpec, count_matching_windows, crop_back, extend
from .pipeline import (
    PipelineConfig,
    baseline_translate,
    render_report,
    translate,
    translate_freecontrol,
)
from .schedule import (
    NoiseSchedule,
    TrajectoryRecord,
    ddim_invert_step,
    ddim_sample_step,
    run_inversion,
    run_sampling,
)
from .tensors import (
    ColumnRange,
    crop_columns,
    place_columns_accumulate,
    read_png,
    read_raw,
    rotate_columns,
    write_png,
    write_raw,
)
from .tiler import WindowSchedule, blended_step, build_schedule, run_tiled_translation

__version__ = "0.1.0"
