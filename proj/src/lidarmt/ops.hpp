// Copyright 2026 The lidarmt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>
#include <vector>

#include "lidarmt/autograd.hpp"

namespace lmt::ag {

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// Adds a 1xC row to every row of a.
Var add_row(const Var& a, const Var& row);
// x * w + b, with b optional (undefined Var).
Var linear(const Var& x, const Var& w, const Var& b);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
// Zero gradient outside [lo, hi].
Var clamp(const Var& a, double lo, double hi);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
// Softmax over each run of group_size consecutive columns.
Var softmax_groups(const Var& a, Index group_size);
// Per-row normalization over the feature axis followed by gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);

// out[i] = a[rows[i]]; rows[i] < 0 yields a zero row.
Var gather_rows(const Var& a, std::span<const int> rows);
// out[rows[i]] += a[i]; rows[i] < 0 drops the row.
Var scatter_add_rows(const Var& a, std::span<const int> rows, Index n_out);
// Column-wise max over rows sharing a segment id. Empty segments yield zeros;
// ties route the gradient to the first row reaching the max.
Var segment_max(const Var& a, std::span<const int> segment, Index n_segments);

Var sum(const Var& a);
Var mean(const Var& a);

}  // namespace lmt::ag
