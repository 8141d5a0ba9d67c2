# Copyright 2026 The LAQM Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the learned audio quality metric core."""

from ._laqm import (  # noqa: F401
    DistanceMapping,
    Encoder,
    average_ranks,
    fad,
    fit_cubic,
    fit_mlp,
    label_distance,
    pearson,
    resample,
    rnc_batch,
    rnc_batch_grad,
    segment,
    spearman,
)

__all__ = [
    "DistanceMapping",
    "Encoder",
    "average_ranks",
    "fad",
    "fit_cubic",
    "fit_mlp",
    "label_distance",
    "pearson",
    "resample",
    "rnc_batch",
    "rnc_batch_grad",
    "segment",
    "spearman",
]
