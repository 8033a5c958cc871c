"""
CSV parsing and writing utilities.
"""
import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from kdn.errors import ParseError

logger = logging.getLogger(__name__)

# Enough digits for an exact float64 round trip
FLOAT_FORMAT = '%.17g'

LabelColumn = Union[str, int]


def resolve_label_column(columns: pd.Index, label_column: LabelColumn) -> str:
    """
    Map a label column given by name or 0-based index to its header name.

    Args:
        columns: Header of the parsed table
        label_column: Column name, or integer / digit string index

    Returns:
        The header name of the label column
    """
    if isinstance(label_column, str) and label_column.strip() in columns:
        return label_column.strip()

    try:
        index = int(label_column)
    except (TypeError, ValueError):
        raise ParseError(f"Label column '{label_column}' not found in header {list(columns)}")

    if not -len(columns) <= index < len(columns):
        raise ParseError(f"Label column index {index} out of range for {len(columns)} columns")
    return columns[index]


def load_table(file_path: Path, label_column: LabelColumn) -> Tuple[pd.DataFrame, pd.Series]:
    """
    Load a CSV file and split it into numeric features and raw labels.

    Args:
        file_path: Path to the CSV file (header row required)
        label_column: Label column name or 0-based index

    Returns:
        (features DataFrame of float64, label Series)
    """
    try:
        df = pd.read_csv(file_path, float_precision='round_trip', skipinitialspace=True)
    except pd.errors.ParserError as e:
        raise ParseError(f"{file_path}: row/column mismatch ({e})") from e
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{file_path}: file is empty") from e

    # Strip whitespace from column names
    df.columns = df.columns.astype(str).str.strip()

    label_name = resolve_label_column(df.columns, label_column)
    labels = df[label_name]
    features = df.drop(columns=[label_name]).copy()

    if features.shape[1] == 0:
        raise ParseError(f"{file_path}: no feature columns besides '{label_name}'")

    missing_labels = labels.isna()
    if missing_labels.any():
        row = int(np.flatnonzero(missing_labels.to_numpy())[0])
        raise ParseError(f"{file_path}: missing label at data row {row}")

    for col in features.columns:
        raw = features[col]
        values = pd.to_numeric(raw, errors='coerce')
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(
                f"{file_path}: non-numeric or non-finite cell {raw.iloc[row]!r} "
                f"at data row {row}, column '{col}'"
            )
        features[col] = values.astype(np.float64)

    logger.debug("Loaded %s: %d rows, %d features", file_path, len(df), features.shape[1])
    return features, labels


def write_table(
    file_path: Path,
    features: np.ndarray,
    labels: List[str],
    feature_names: List[str],
    label_name: str = 'label'
) -> None:
    """
    Write features plus a trailing label column as CSV.

    Args:
        file_path: Destination
        features: n x d matrix
        labels: n label strings
        feature_names: d column names
        label_name: Header for the label column
    """
    df = pd.DataFrame(np.asarray(features, dtype=np.float64), columns=list(feature_names))
    df[label_name] = list(labels)
    df.to_csv(file_path, index=False, float_format=FLOAT_FORMAT)


def write_matrix_csv(file_path: Path, matrix: np.ndarray) -> None:
    """Write a matrix (or vector, as one column) row-major without header."""
    values = np.asarray(matrix, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    pd.DataFrame(values).to_csv(file_path, header=False, index=False, float_format=FLOAT_FORMAT)


def read_matrix_csv(file_path: Path) -> np.ndarray:
    """Read a headerless matrix written by write_matrix_csv."""
    try:
        df = pd.read_csv(file_path, header=None, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"{file_path}: unreadable matrix ({e})") from e
    return df.to_numpy(dtype=np.float64)
