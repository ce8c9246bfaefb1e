# Copyright 2026 The bevloc Authors
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

"""LiDAR bird's-eye-view intensity map localization."""

from ._core import (
    BevGrid,
    InvalidArgument,
    Pose2D,
    compose,
    crop_window,
    fft_friendly_size,
    generate_map,
    inverse,
    inverse_compose,
    load_map,
    loss,
    run_cli,
    score_volume,
    wrap_angle,
)

__all__ = [
    "BevGrid",
    "InvalidArgument",
    "Pose2D",
    "compose",
    "crop_window",
    "fft_friendly_size",
    "generate_map",
    "inverse",
    "inverse_compose",
    "load_map",
    "loss",
    "run_cli",
    "score_volume",
    "wrap_angle",
]
