// Copyright 2026 The ReCon Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Trains the base model and a congestion-regularised model on a small
// synthetic log, then compares them with two re-ranking baselines.

#include <cstdio>

#include "recon/baselines.hpp"
#include "recon/harness.hpp"
#include "recon/recon.hpp"

int main() {
  using namespace recon;

  SyntheticSpec spec;
  spec.num_users = 100;
  spec.num_items = 150;
  const SplitDataset data = temporal_split(generate_synthetic(spec));
  const UserItemSets exclude = UserItemSets::from_log(data.train);
  const UserItemSets test = UserItemSets::from_log(data.test);
  const int k = 10;

  auto report = [&](const char* name, const RecommendationLists& recs) {
    const MetricReport r = evaluate(recs, test, data.num_items());
    std::printf("%-16s ndcg %.4f  recall %.4f  coverage %.4f  congestion %.4f  gini %.4f\n", name,
                r.ndcg, r.recall, r.coverage, r.congestion, r.gini);
  };

  ReconConfig cfg;
  const Matrix base = score_matrix(train_base(cfg, data).params);
  report("base", recommend_topk(base, k, &exclude));

  cfg.lambda = 1e-3;
  report("recon 1e-3", recommend_topk(score_matrix(train(cfg, data).params), k, &exclude));

  report("carot IdPlus", carot(base, {}, k, &exclude));
  report("fairrec 0.5", fairrec(base, {0.5, k, std::nullopt}, &exclude));
  return 0;
}
