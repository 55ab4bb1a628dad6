#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "drugsent/autograd.hpp"

namespace drugsent {

// Named model parameter; trainability lives on the Var (requires_grad).
struct Parameter {
    std::string name;
    nn::Var var;
};

// Binary weight file: magic, count, then (name, shape, float64 payload)
// per parameter. Doubles round-trip bit-exactly.
void write_weights(const std::filesystem::path& path,
                   const std::vector<Parameter>& params);

std::unordered_map<std::string, nn::Tensor> read_weights(
    const std::filesystem::path& path);

// Strict by-name load: every parameter must be present with the right
// shape, and no extra entries may remain.
void load_weights_into(std::vector<Parameter>& params,
                       std::unordered_map<std::string, nn::Tensor> loaded,
                       const std::string& context);

} // namespace drugsent
