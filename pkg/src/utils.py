import hashlib
import json
import os
import random
import threading
import time
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import psutil
from joblib import Parallel, delayed


def read_json_as_dict(input_path: str) -> Dict:
    """
    Reads a JSON file (run configuration, summary or array sidecar).

    Args:
        input_path (str): Path of the JSON file.

    Returns:
        dict: The decoded content.

    Raises:
        ValueError: If the path is not a file or does not hold a JSON object.
    """
    if not os.path.isfile(input_path):
        raise ValueError(f"JSON file not found: {input_path}")
    with open(input_path, "r", encoding="utf-8") as file:
        content = json.load(file)
    if not isinstance(content, dict):
        raise ValueError(f"Expected a JSON object in {input_path}")
    return content


def set_seeds(seed_value: int) -> None:
    """
    Set the random seeds for Python and NumPy to ensure reproducibility of
    results.

    Args:
        seed_value (int): The seed value to use for random number generation.
            Must be a non-negative integer.
    """
    if isinstance(seed_value, (int, np.integer)) and seed_value >= 0:
        os.environ["PYTHONHASHSEED"] = str(seed_value)
        random.seed(seed_value)
        np.random.seed(int(seed_value) % (2**32))
    else:
        raise ValueError(f"Invalid seed value: {seed_value}. Cannot set seeds.")


def config_hash(config: Dict) -> str:
    """sha256 of the canonical JSON form of a configuration dictionary."""
    canonical = json.dumps(
        config, sort_keys=True, separators=(",", ":"), default=make_serializable
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_dataframe_as_csv(
    dataframe: pd.DataFrame,
    file_path: str,
    float_format: str = "%.12e",
    footer: Optional[str] = None,
) -> None:
    """
    Saves a pandas dataframe to a CSV file, optionally followed by a single
    `#`-prefixed footer line.

    Args:
        dataframe (pd.DataFrame): The pandas dataframe to be saved.
        file_path (str): File path and name to save the CSV file.
        float_format (str): printf-style format used for floats.
        footer (Optional[str]): Text of the trailing comment line.

    Raises:
        IOError: If an error occurs while saving the CSV file.
    """
    try:
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        with open(file_path, "w", encoding="utf-8", newline="") as file:
            dataframe.to_csv(
                file, index=False, float_format=float_format, lineterminator="\n"
            )
            if footer is not None:
                file.write(f"# {footer}\n")
    except IOError as exc:
        raise IOError(f"Error saving CSV file: {exc}") from exc


def read_csv_with_footer(file_path: str) -> pd.DataFrame:
    """Reads a CSV written by `save_dataframe_as_csv`, skipping comment lines."""
    return pd.read_csv(file_path, comment="#")


def save_json(file_path_and_name: str, data: Any) -> None:
    """Save json to a path (directory + filename)"""
    os.makedirs(os.path.dirname(os.path.abspath(file_path_and_name)), exist_ok=True)
    with open(file_path_and_name, "w", encoding="utf-8") as file:
        json.dump(
            data,
            file,
            default=make_serializable,
            sort_keys=True,
            indent=4,
            separators=(",", ": "),
        )


def make_serializable(obj: Any) -> Union[int, float, str, List, Any]:
    """
    Converts a given object into a serializable format.

    Args:
        obj: Any Python object

    Returns:
        - numpy integers as int, numpy floats as float, numpy bools as bool
        - numpy arrays as (nested) lists
        - complex numbers as [real, imag]
        - otherwise the default behavior of json.JSONEncoder
    """
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    elif isinstance(obj, np.floating):
        return float(obj)
    elif isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    else:
        return json.JSONEncoder.default(None, obj)


def save_array(file_path: str, array: np.ndarray, meta: Optional[Dict] = None) -> None:
    """
    Writes an array as raw little-endian bytes plus a `<file>.json` sidecar
    holding dtype, shape and the given metadata.

    Real arrays are written as `<f8`, complex arrays as `<c16`.

    Args:
        file_path (str): Path of the raw file.
        array (np.ndarray): Array to write.
        meta (Optional[Dict]): Extra metadata for the sidecar.
    """
    array = np.asarray(array)
    dtype = "<c16" if np.iscomplexobj(array) else "<f8"
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    np.ascontiguousarray(array, dtype=dtype).tofile(file_path)
    sidecar = dict(meta or {})
    sidecar.update({"dtype": dtype, "shape": list(array.shape)})
    save_json(f"{file_path}.json", sidecar)


def load_array(file_path: str) -> Tuple[np.ndarray, Dict]:
    """Reads an array written by `save_array`; returns (array, sidecar)."""
    sidecar = read_json_as_dict(f"{file_path}.json")
    array = np.fromfile(file_path, dtype=sidecar["dtype"])
    return array.reshape(sidecar["shape"]), sidecar


def run_in_parallel(
    func: Callable, items: Iterable, n_jobs: int = 1
) -> List[Any]:
    """
    Maps `func` over `items` with joblib; the output order follows the input
    order regardless of scheduling.

    Args:
        func (Callable): Function of one argument.
        items (Iterable): Work items.
        n_jobs (int): Worker count; 1 runs sequentially in-process.

    Returns:
        List[Any]: Results in input order.
    """
    items = list(items)
    if n_jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(func)(item) for item in items
    )


def resident_memory() -> int:
    """Resident set size in bytes of this process and its joblib workers."""
    process = psutil.Process(os.getpid())
    total = process.memory_info().rss
    for child in process.children(recursive=True):
        try:
            total += child.memory_info().rss
        except psutil.NoSuchProcess:
            continue
    return total


class ResourceTracker:
    """
    Context manager that logs the wall time and the peak resident memory of a
    study run. Memory is sampled on a daemon thread every
    `monitoring_interval` seconds and once more on exit.
    """

    def __init__(self, logger, monitoring_interval: float):
        self.logger = logger
        self.monitoring_interval = monitoring_interval
        self.peak_memory = 0
        self.elapsed_time = 0.0
        self._stop = threading.Event()
        self._sampler: Optional[threading.Thread] = None

    def _sample(self) -> None:
        self.peak_memory = max(self.peak_memory, resident_memory())

    def _run(self) -> None:
        while not self._stop.wait(self.monitoring_interval):
            self._sample()

    def __enter__(self):
        self.start_time = time.perf_counter()
        self._sample()
        self._sampler = threading.Thread(target=self._run, daemon=True)
        self._sampler.start()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self._stop.set()
        self._sampler.join()
        self._sample()
        self.elapsed_time = time.perf_counter() - self.start_time
        self.logger.info(
            f"Execution time: {self.elapsed_time:.2f} seconds; "
            f"peak memory: {self.peak_memory / (1024**2):.2f} MB"
        )
