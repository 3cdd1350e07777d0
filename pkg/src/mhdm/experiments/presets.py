"""Named configurations for the one-dimensional experiments.

Each preset is stored as config text, so ``mhdm preset NAME`` and
``mhdm run FILE`` with the same text are interchangeable.
"""

from .config import parse_config

__all__ = ["PRESETS", "preset_names", "preset_text", "load_preset"]

# ||T x_true|| for the sparse deconvolution runs; the noise levels are fractions of it
SPARSE_DATA_NORM = 5.0833298918755
SPARSE_SEED = 20230817

_TV_COMMON = """\
n = 100
truth = tv-two-blocks
penalty = tv1d
lambda0 = 1.0
ratio = 10.0
stop = fixed
steps = 12
tikhonov_sweep = True
"""

_SPARSE_COMMON = f"""\
n = 100
operator = gaussian
operator_sigma = 0.025
truth = sparse-peaks
data_norm = {SPARSE_DATA_NORM!r}
noise = gaussian
seed = {SPARSE_SEED}
stop = discrepancy
tau = 1.01
steps = 100
tikhonov_sweep = True
"""

PRESETS = {
    "table1-denoise": "name = table1-denoise\noperator = identity\n" + _TV_COMMON,
    "table1-deblur": (
        "name = table1-deblur\noperator = gaussian\noperator_sigma = 0.1\n" + _TV_COMMON
        # the blurred problem needs a longer inner budget to resolve e_n
        + "solver_max_iter = 20000\nsolver_tol = 1e-10\n"
    ),
    "table2-noise-sweep": (
        "name = table2-noise-sweep\n" + _SPARSE_COMMON
        + "penalty = l1\nlambda0 = 1.0\nratio = 2.0\ndelta = 0.050833298918755\n"
        + "sweep = delta\nsweep_values = [0.0051083329891876, 0.050833298918755, 0.508332989187551]\n"
    ),
    "table3-lambda0-sweep": (
        "name = table3-lambda0-sweep\n" + _SPARSE_COMMON
        + "penalty = l1\nratio = 2.0\ndelta = 0.050833298918755\n"
        + "sweep = lambda0\nsweep_values = [0.01, 0.1, 1.0, 10.0]\n"
    ),
    "table3-l1": (
        "name = table3-l1\n" + _SPARSE_COMMON
        + "penalty = l1\nlambda0 = 1.0\nratio = 2.0\ndelta = 0.050833298918755\n"
    ),
    "table4-ratio-sweep": (
        "name = table4-ratio-sweep\n" + _SPARSE_COMMON
        + "penalty = l1\nlambda0 = 1.0\ndelta = 0.050833298918755\n"
        + "sweep = ratio\nsweep_values = [1.2, 2.0, 3.0, 10.0]\n"
    ),
    "table5-p-sweep": (
        "name = table5-p-sweep\n" + _SPARSE_COMMON
        + "lambda0 = 0.01\nratio = 2.0\ndelta = 0.050833298918755\npenalty = lp:0.5\n"
        + "sweep = penalty\n"
        + "sweep_values = ['lp:0.995', 'lp:0.9', 'lp:0.75', 'lp:0.5', 'lp:0.25', 'lp:0.05']\n"
    ),
    "table6-varying-p": (
        "name = table6-varying-p\n" + _SPARSE_COMMON.replace("tikhonov_sweep = True", "tikhonov_sweep = False")
        + "variant = flexible\nexponents = increasing\n"
        + "lambda0 = 0.01\nratio = 2.0\ndelta = 0.050833298918755\n"
        + "sweep = exponents\nsweep_values = ['increasing', 'decreasing']\n"
    ),
}


def preset_names():
    return sorted(PRESETS)


def preset_text(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None


def load_preset(name):
    return parse_config(preset_text(name), f"preset:{name}")
