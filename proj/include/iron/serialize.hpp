#pragma once

#include <string>
#include <vector>

#include "iron/net.hpp"
#include "iron/synth.hpp"

namespace iron {

// Binary file formats. All integers little-endian, floats IEEE-754.
//
//   IRNT  magic "IRNT", u32 version, u32 S, f64 x.min,x.max,y.min,y.max,
//         z.min,z.max, then S^3 f32 values row-major (i outer, k inner).
//   IRNW  magic "IRNW", u32 version, u32 header byte length, UTF-8 text
//         manifest of the layer plan, then all parameters as f32 in
//         manifest order.
//   IRND  magic "IRND", u32 version, u64 sample count, u32 sub-tensor edge,
//         u32 label arity, then per sample edge^3 f32 values followed by
//         the label components as f32.

inline constexpr std::uint32_t kFormatVersion = 1;

void write_tensor(const SimilarityTensor& tensor, const std::string& path);
SimilarityTensor read_tensor(const std::string& path);

void write_model(IronModel& model, const std::string& path);
IronModel read_model(const std::string& path);

void write_dataset(const std::vector<TrainingSample>& samples, const std::string& path);
std::vector<TrainingSample> read_dataset(const std::string& path);

// Two-column CSV "epoch,mean_loss" with one row per epoch.
void write_loss_csv(const std::vector<double>& loss_history, const std::string& path);

}  // namespace iron
