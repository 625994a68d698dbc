#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpe/field.hpp"
#include "mpe/game.hpp"
#include "mpe/neural.hpp"
#include "mpe/simulate.hpp"

namespace mpe::io {

// round-trip exact decimal formatting used by every CSV writer
std::string fmt(double v);

// values.csv: t,x,n_1..n_d,v   (t-major, then state, then simplex rank)
void write_values_csv(const std::filesystem::path& path, const GameModel& model,
                      const ValueField& v);

// control.csv: t,x,n_1..n_d,a_1..a_{d-1}
void write_control_csv(const std::filesystem::path& path, const GameModel& model,
                       const ControlField& c);
ControlField read_control_csv(const std::filesystem::path& path,
                              const GameModel& model);

// convergence.csv: iter,residual
void write_convergence_csv(const std::filesystem::path& path,
                           std::span<const double> residuals);

// slice.csv: p,z
void write_slice_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<double, double>>& slice);

// deviations.csv: iter,deviation
void write_deviations_csv(const std::filesystem::path& path,
                          std::span<const double> deviations);

// trajectories.csv: traj_id,event_time,actor,from,to ; costs.csv: traj_id,cost
void write_trajectories_csv(const std::filesystem::path& path,
                            const GameModel& model,
                            std::span<const TrajectoryRecord> records);
void write_costs_csv(const std::filesystem::path& path,
                     std::span<const double> costs);

// bands.csv: t,x,mean,std (empirical per-state fractions over evaluations)
struct DistributionBands {
    std::vector<double> times;
    std::vector<double> mean;  // times.size() * d, state-major within a time
    std::vector<double> std;
};
void write_bands_csv(const std::filesystem::path& path, const GameModel& model,
                     const DistributionBands& bands);

// loss.csv: iter,epoch,loss
void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<NeuralIterLog>& logs);

// versioned network checkpoints (JSON)
void save_control_net(const std::filesystem::path& path, const ControlNet& net);
ControlNet load_control_net(const std::filesystem::path& path);
void save_mixed_control(const std::filesystem::path& path, const MixedControl& mc);
MixedControl load_mixed_control(const std::filesystem::path& path);

}  // namespace mpe::io
