# Copyright 2026 The DiffSketch Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Count Sketch gradient compression with privacy accounting."""

from diffsketch._core import (
    CountSketch,
    DiffSketchError,
    SketchDims,
    dims_for_error,
    estimate_stats,
    run_cli,
    sketch_epsilon,
)

__all__ = [
    "CountSketch",
    "DiffSketchError",
    "SketchDims",
    "dims_for_error",
    "estimate_stats",
    "run_cli",
    "sketch_epsilon",
]
