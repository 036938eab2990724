"""Error taxonomy for the pipeline.

Every failure the library raises deliberately derives from :class:`LiqlabError`
and carries an ``exit_code`` so the command line tool can map error classes to
stable process status codes:

* 2 -- configuration errors (bad flags, bad session window, bad synth config)
* 3 -- input errors (missing files, unrecognized headers)
* 4 -- data errors (unsorted tapes, datasets too small, degenerate columns)
* 5 -- modeling errors (diverged training, shape mismatches, blown budgets)

Anything else escaping to the CLI is a bug and exits with code 1.
"""

from __future__ import annotations


class LiqlabError(Exception):
    """Base class for all deliberate pipeline failures."""

    exit_code = 1


class ConfigError(LiqlabError):
    """A configuration value is missing, malformed, or inconsistent."""

    exit_code = 2


class InputError(LiqlabError):
    """An input file is missing or structurally unreadable."""

    exit_code = 3


class MalformedHeader(InputError):
    """A CSV input does not start with the documented header line."""


class DataError(LiqlabError):
    """Input rows are readable but violate a data contract."""

    exit_code = 4


class UnsortedInput(DataError):
    """Timestamps within one ticker stream went backwards."""


class DatasetTooSmall(DataError):
    """Fewer labeled rows than the minimum needed for a 70/15/15 split."""


class ConstantFeature(DataError):
    """A feature column is constant on the training slice (zero std)."""


class InsufficientSample(DataError):
    """Too few usable minutes to estimate an empirical rate."""


class ModelError(LiqlabError):
    """Training or inference failed."""

    exit_code = 5


class NonFiniteLoss(ModelError):
    """The training objective became NaN or infinite."""


class DimensionMismatch(ModelError):
    """A feature row's width disagrees with the model's expectation."""


class LengthMismatch(ModelError):
    """Paired label/prediction sequences have different lengths."""


class EmptyMatrix(ModelError):
    """Accuracy requested on a confusion matrix with zero total count."""


class BudgetExceeded(ModelError):
    """A subset search would enumerate more candidates than allowed."""
