"""Mode-decomposition denoising of lung-sound and general 1-D acoustic
signals: classical per-mode thresholding and a per-sample MLP mapper,
plus noise generators, metrics and a reproducible benchmark harness.
"""

from .bench import (
    EvalReport,
    EvalRow,
    SweepSpec,
    export_report,
    load_report,
    run_bench,
    run_sweep,
    run_table3,
    run_table4,
)
from .emd import Imf13, ImfStack, SiftConfig, decompose, to_fixed_13
from .metrics import fit_pct, snr_db, spectrogram
from .mlp import (
    MlpModel,
    SampleDataset,
    TrainSpec,
    build_mlp,
    denoise_ann,
    forward,
    load_model,
    make_dataset,
    save_model,
    train,
    train_lm,
)
from .noise import NoiseSpec, gen_pink, gen_white, mix_at_snr
from .signals import (
    AffineParams,
    BreathSpec,
    Signal,
    denormalize,
    load_wav,
    normalize,
    resample_half,
    synth_breath_cycle,
    write_wav,
)
from .thresholding import (
    CustomParams,
    ThresholdPlan,
    denoise_emd_custom,
    estimate_e1,
    model_energies,
    threshold_custom,
    threshold_hard,
    threshold_soft,
    universal_thresholds,
)

__version__ = "0.1.0"
