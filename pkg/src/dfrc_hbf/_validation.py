"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


def check_complex_array(x, name, ndim=None, shape=None):
    """Return ``x`` as a finite complex128 array, raising ``ValueError`` otherwise.

    ``shape`` may contain ``None`` entries as wildcards.
    """
    arr = np.asarray(x)
    if arr.dtype == object:
        raise ValueError(f"{name} must be numeric, got object array")
    arr = arr.astype(np.complex128, copy=False)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if shape is not None:
        if arr.ndim != len(shape) or any(
            want is not None and got != want for got, want in zip(arr.shape, shape)
        ):
            raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def hermitian_part(a):
    """(A + A^H)/2 over the last two axes."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def check_hermitian_psd(a, name, herm_tol=1e-12, psd_tol=1e-10):
    a = check_complex_array(a, name, ndim=2)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > herm_tol * scale:
        raise ValueError(f"{name} is not Hermitian")
    if np.linalg.eigvalsh(hermitian_part(a)).min() < -psd_tol * scale:
        raise ValueError(f"{name} is not positive semidefinite")
    return a
