#pragma once

#include <string>

#include "admf/nn.hpp"

namespace admf {

/// Single-file binary checkpoint, little-endian:
///   magic "ADMFCKPT" | u32 version | u64 json_len | config-echo JSON |
///   u64 n_tensors | per tensor: u32 name_len, name, u32 ndim, u64 dims..., f64 data.
void save_checkpoint(const std::string& path, const std::string& config_echo,
                     const nn::ParamStore& store);

/// Loads tensors into an existing store; every name and shape must match.
/// Returns the config echo.
std::string load_checkpoint(const std::string& path, nn::ParamStore& store);

/// Reads only the config echo (for model reconstruction before loading).
std::string read_checkpoint_config(const std::string& path);

}  // namespace admf
