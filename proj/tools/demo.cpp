// Library walk-through: pretrain a body, meta-train L3RS briefly, then compare
// it with Adam on one held-out task.

#include <algorithm>
#include <cstdio>
#include <memory>

#include "l3rs/l3rs.hpp"

int main() {
  using namespace l3rs;

  TaskDistributionSpec dist;
  const std::vector<std::size_t> hidden{32};
  const auto body = pretrain_checkpoint(dist, hidden, 500, 1);
  std::printf("pretrained: eval loss %.4f, accuracy %.3f\n", body.eval_loss, body.eval_accuracy);

  TaskSource train{dist, Split::MetaTrain, hidden, std::make_shared<const ParamSet>(body.params)};
  TaskSource test = train;
  test.split = Split::MetaTest;

  Layout layout;  // SGD + Adam, full controller, gammas {0, 0.9, 0.99}
  layout.num_components = train.task_network().num_components();
  NesConfig nes;
  nes.population = 16;
  nes.meta_batch = 4;
  nes.generations = 60;
  nes.seed = 3;
  const NesState trained = meta_train(nes, train, layout, initial_nes_state(layout, 1));
  // Single generations are noisy (a few candidates can blow up), so compare
  // medians over the first and last ten.
  auto median_fitness = [&](std::size_t from) {
    std::vector<double> f;
    for (std::size_t g = from; g < from + 10; ++g) f.push_back(trained.history[g].mean_fitness);
    std::nth_element(f.begin(), f.begin() + 5, f.end());
    return f[5];
  };
  std::printf("NES: median fitness %.4f (first 10) -> %.4f (last 10)\n", median_fitness(0),
              median_fitness(trained.history.size() - 10));

  const auto psi = std::make_shared<const MetaParams>(unflatten(trained.psi, layout));
  const Task task = sample_task(test, 12345, 25);
  const auto learned = inner_loop_eval(l3rs_handle("L3RS", layout, psi).make, task);
  const auto adam = run_baseline(task, {BaselineKind::AdamConst, 0.01, false});
  std::printf("K=25 held-out task: L3RS loss %.4f (acc %.3f), Adam@0.01 loss %.4f (acc %.3f)\n", learned.meta_loss,
              learned.eval_accuracy, adam.meta_loss, adam.accuracy);
  return 0;
}
