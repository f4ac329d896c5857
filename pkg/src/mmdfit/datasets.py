"""Bundled example data."""
from __future__ import annotations

import warnings
from importlib import resources

from .data_io import load_csv


def airquality_path():
    """Filesystem path of the bundled New York air quality measurements CSV."""
    return resources.files("mmdfit").joinpath("data/airquality.csv")


def airquality():
    """Complete rows of the air quality data (Ozone, Solar.R, Wind, Temp, Month, Day).

    Rows with missing cells are dropped silently; 111 of the 153 daily
    records remain.
    """
    with resources.as_file(airquality_path()) as p:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, data, names = load_csv(p)
    return data, names
