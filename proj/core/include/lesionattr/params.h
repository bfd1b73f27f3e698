#ifndef LESIONATTR_PARAMS_H_
#define LESIONATTR_PARAMS_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lesionattr/tensor.h"

namespace lesionattr {

// Ordered collection of named parameter tensors. Order is the registration
// order and is what optimizers and gradient buffers index by.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  std::span<Tensor> values() { return values_; }
  std::span<const Tensor> values() const { return values_; }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t scalar_count() const;

  bool operator==(const ParamStore&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Checkpoint container (JSON):
//   {"format": "lesionattr.params", "version": 1,
//    "tensors": [{"name": str, "shape": [int...], "data": [float...]}...]}
// Values are written with round-trip precision.
inline constexpr int kParamFormatVersion = 1;

void save_params(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_params(const std::filesystem::path& path);

// Copies values from `source` into `target` by name, checking shapes.
void assign_params(ParamStore& target, const ParamStore& source);

}  // namespace lesionattr

#endif  // LESIONATTR_PARAMS_H_
