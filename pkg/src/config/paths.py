import os

# Path to the root directory which contains the src directory
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Path to the outputs volume:
#   set to environment variable BOSE_LAB_OUTPUTS_PATH if it exists
#   else: set to default path which would be <path_to_root>/lab_outputs/
LAB_OUTPUTS = os.environ.get(
    "BOSE_LAB_OUTPUTS_PATH", os.path.join(ROOT_DIR, "lab_outputs")
)

# Path to study results
OUTPUT_DIR = os.path.join(LAB_OUTPUTS, "outputs")
# Default result directories, one per command
SCATTERING_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "scattering")
NLS_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "nls")
KERNELS_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "kernels")
FLUCT_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "fluct")
SUITE_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "suite")

# Path to errors directory inside outputs directory
ERRORS_DIR = os.path.join(OUTPUT_DIR, "errors")
# Error file paths
SCATTERING_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "scattering_error.txt")
NLS_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "nls_error.txt")
KERNELS_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "kernels_error.txt")
FLUCT_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "fluct_error.txt")
SUITE_ERROR_FILE_PATH = os.path.join(ERRORS_DIR, "suite_error.txt")

# Paths inside the source directory
# Path to source directory
SRC_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
# Path to config directory
CONFIG_DIR = os.path.join(SRC_DIR, "config")
# Path to run config (seed, float format, schedule density)
RUN_CONFIG_FILE_PATH = os.path.join(CONFIG_DIR, "run_config.json")
# Path to default experiment files
DEFAULTS_DIR = os.path.join(CONFIG_DIR, "defaults")
SCATTERING_CONFIG_FILE_PATH = os.path.join(DEFAULTS_DIR, "scattering.cfg")
NLS_CONFIG_FILE_PATH = os.path.join(DEFAULTS_DIR, "nls.cfg")
KERNELS_CONFIG_FILE_PATH = os.path.join(DEFAULTS_DIR, "kernels.cfg")
FLUCT_CONFIG_FILE_PATH = os.path.join(DEFAULTS_DIR, "fluct.cfg")
SUITE_CONFIG_FILE_PATH = os.path.join(DEFAULTS_DIR, "suite.cfg")
