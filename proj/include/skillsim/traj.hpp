#pragma once
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace skillsim {

// time-indexed record of skills / per-task losses / total loss, shared by the
// gradient models and the ODE model (which fills `times` instead of step ids)
struct Trajectory {
  int n_task = 0;
  std::vector<long> steps;
  std::vector<double> times;
  std::vector<double> skills;       // row-major n_rec x n_task
  std::vector<double> task_losses;  // row-major n_rec x n_task
  std::vector<double> total_loss;
  std::vector<double> align;  // optional, row-major n_rec x n_task
  std::string meta;           // json snapshot of the run configuration

  size_t n_rec() const { return total_loss.size(); }
  double skill(size_t r, int i) const { return skills[r * n_task + i]; }
  double task_loss(size_t r, int i) const { return task_losses[r * n_task + i]; }
  double align_at(size_t r, int i) const { return align[r * n_task + i]; }
  double x_of(size_t r) const { return times.empty() ? static_cast<double>(steps[r]) : times[r]; }
};

// first recorded step with skill >= level, -1 if never
inline long crossing_step(const Trajectory& t, int task, double level) {
  for (size_t r = 0; r < t.n_rec(); ++r)
    if (t.skill(r, task) >= level) return t.steps.empty() ? static_cast<long>(r) : t.steps[r];
  return -1;
}

// first recorded step with per-task loss < thresh, -1 if never
inline long convergence_step(const Trajectory& t, int task, double thresh = 0.01) {
  for (size_t r = 0; r < t.n_rec(); ++r)
    if (t.task_loss(r, task) < thresh) return t.steps.empty() ? static_cast<long>(r) : t.steps[r];
  return -1;
}

inline void write_trajectory_csv(const Trajectory& t, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::fprintf(f, t.times.empty() ? "step" : "time");
  for (int i = 0; i < t.n_task; ++i) std::fprintf(f, ",s_%d", i + 1);
  for (int i = 0; i < t.n_task; ++i) std::fprintf(f, ",loss_%d", i + 1);
  std::fprintf(f, ",total_loss");
  bool has_align = !t.align.empty();
  if (has_align)
    for (int i = 0; i < t.n_task; ++i) std::fprintf(f, ",align_%d", i + 1);
  std::fprintf(f, "\n");
  for (size_t r = 0; r < t.n_rec(); ++r) {
    if (t.times.empty())
      std::fprintf(f, "%ld", t.steps[r]);
    else
      std::fprintf(f, "%.17g", t.times[r]);
    for (int i = 0; i < t.n_task; ++i) std::fprintf(f, ",%.17g", t.skill(r, i));
    for (int i = 0; i < t.n_task; ++i) std::fprintf(f, ",%.17g", t.task_loss(r, i));
    std::fprintf(f, ",%.17g", t.total_loss[r]);
    if (has_align)
      for (int i = 0; i < t.n_task; ++i) std::fprintf(f, ",%.17g", t.align_at(r, i));
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace skillsim
