/*
 * Copyright 2026 The swmt Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "swmt/data.hpp"
#include "swmt/train.hpp"

namespace swmt::testing {

/// A few short synthetic videos; every phase and tool occurs in the training half.
inline SyntheticConfig tiny_synthetic(std::size_t n_videos = 6) {
  SyntheticConfig c;
  c.n_videos = n_videos;
  c.duration_scale = 0.03;
  c.feature_dim = 8;
  c.seed = 7;
  return c;
}

/// Small network and few epochs so full pipeline runs take well under a second.
inline PipelineConfig tiny_pipeline() {
  PipelineConfig p;
  p.stage1.epochs = 3;
  p.stage1.batch = 16;
  p.stage1.sgd.lr = 1e-2;
  p.stage2.epochs = 3;
  p.encoder_hidden = 12;
  p.feature_dim = 10;
  p.lstm_hidden = 6;
  p.seed = 5;
  return p;
}

struct TinyRun {
  Dataset dataset;
  Split split;
  SplitView view;
  TrainingStats stats;

  explicit TinyRun(const SyntheticConfig& sc = tiny_synthetic(),
                   double epsilon = kDefaultEpsilon) {
    dataset.videos = generate_synthetic(sc);
    dataset.generator = to_json(sc);
    const auto ids = dataset.ids();
    split = split_first_half(ids);
    view = make_split_view(dataset, split);
    stats = compute_training_stats(view.train, epsilon);
  }
  TinyRun(const TinyRun&) = delete;
  TinyRun& operator=(const TinyRun&) = delete;
};

}  // namespace swmt::testing
