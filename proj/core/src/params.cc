#include "lesionattr/params.h"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace lesionattr {

using nlohmann::json;

std::size_t ParamStore::add(std::string name, Tensor value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

void save_params(const ParamStore& params, const std::filesystem::path& path) {
  json tensors = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.value(i);
    tensors.push_back({{"name", params.name(i)}, {"shape", t.shape()}, {"data", t.storage()}});
  }
  json doc = {{"format", "lesionattr.params"},
              {"version", kParamFormatVersion},
              {"tensors", std::move(tensors)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump() << '\n';
}

ParamStore load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "lesionattr.params") {
    throw std::runtime_error(path.string() + ": not a parameter checkpoint");
  }
  if (doc.value("version", 0) != kParamFormatVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  }
  ParamStore store;
  try {
    for (const json& entry : doc.at("tensors")) {
      Shape shape = entry.at("shape").get<Shape>();
      std::vector<double> data = entry.at("data").get<std::vector<double>>();
      store.add(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return store;
}

void assign_params(ParamStore& target, const ParamStore& source) {
  if (target.size() != source.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(source.size()) +
                             " tensors, model expects " + std::to_string(target.size()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto j = source.find(target.name(i));
    if (!j) throw std::runtime_error("checkpoint is missing tensor " + target.name(i));
    if (source.value(*j).shape() != target.value(i).shape()) {
      throw std::runtime_error("tensor " + target.name(i) + " has shape " +
                               shape_string(source.value(*j).shape()) + ", model expects " +
                               shape_string(target.value(i).shape()));
    }
    target.value(i) = source.value(*j);
  }
}

}  // namespace lesionattr
