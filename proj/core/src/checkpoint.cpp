#include "turbrec/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>

#include "turbrec/io.hpp"

namespace turbrec::checkpoint {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

std::map<std::string, torch::Tensor> named_tensors(mitigator::Mitigator& model) {
    std::map<std::string, torch::Tensor> out;
    for (const auto& p : model->named_parameters()) out.emplace(p.key(), p.value());
    for (const auto& b : model->named_buffers()) out.emplace(b.key(), b.value());
    return out;
}

std::string dtype_name(torch::Dtype d) {
    if (d == torch::kFloat32) return "float32";
    if (d == torch::kFloat64) return "float64";
    throw std::invalid_argument("unsupported checkpoint dtype");
}

torch::Dtype parse_dtype(const std::string& s) {
    if (s == "float32") return torch::kFloat32;
    if (s == "float64") return torch::kFloat64;
    throw io::IoError("unknown tensor dtype '" + s + "' in checkpoint");
}

}  // namespace

void save(const fs::path& dir, mitigator::Mitigator& model, const CheckpointInfo& info, torch::optim::Adam* optimizer) {
    fs::create_directories(dir);
    std::ofstream bin(dir / "weights.bin", std::ios::binary);
    if (!bin) throw io::IoError("cannot write " + (dir / "weights.bin").string());
    json table = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : named_tensors(model)) {
        const auto c = t.detach().to(torch::kCPU).contiguous();
        const auto bytes = static_cast<std::uint64_t>(c.numel() * c.element_size());
        bin.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(bytes));
        table.push_back({{"name", name}, {"dtype", dtype_name(c.scalar_type())}, {"shape", c.sizes().vec()},
                         {"offset", offset}, {"bytes", bytes}});
        offset += bytes;
    }
    if (!bin) throw io::IoError("short write to weights.bin");

    json manifest = {{"format", "turbrec-checkpoint"},
                     {"version", 1},
                     {"config", to_json(info.config)},
                     {"config_hash", info.config_hash.empty() ? config_hash(info.config) : info.config_hash},
                     {"step", info.step},
                     {"epoch", info.epoch},
                     {"metrics", info.metrics},
                     {"tensors", table},
                     {"optimizer", optimizer != nullptr}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
    if (optimizer != nullptr) torch::save(*optimizer, (dir / "optimizer.pt").string());
}

CheckpointInfo read_info(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw io::IoError("no manifest.json in " + dir.string());
    const json m = json::parse(in);
    CheckpointInfo info;
    info.config = project_config_from_json(m.at("config"));
    info.config_hash = m.at("config_hash").get<std::string>();
    info.step = m.at("step").get<std::int64_t>();
    info.epoch = m.at("epoch").get<int>();
    info.metrics = m.at("metrics");
    return info;
}

void load_weights(const fs::path& dir, mitigator::Mitigator& model) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw io::IoError("no manifest.json in " + dir.string());
    const json m = json::parse(in);
    std::ifstream bin(dir / "weights.bin", std::ios::binary);
    if (!bin) throw io::IoError("no weights.bin in " + dir.string());

    auto targets = named_tensors(model);
    std::size_t loaded = 0;
    torch::NoGradGuard guard;
    for (const auto& e : m.at("tensors")) {
        const auto name = e.at("name").get<std::string>();
        const auto it = targets.find(name);
        if (it == targets.end()) throw io::IoError("checkpoint tensor '" + name + "' has no counterpart in the model");
        const auto shape = e.at("shape").get<std::vector<int64_t>>();
        if (it->second.sizes().vec() != shape) throw io::IoError("shape mismatch for tensor '" + name + "'");
        auto buf = torch::empty(shape, torch::TensorOptions().dtype(parse_dtype(e.at("dtype").get<std::string>())));
        bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
        bin.read(static_cast<char*>(buf.data_ptr()), static_cast<std::streamsize>(e.at("bytes").get<std::uint64_t>()));
        if (!bin) throw io::IoError("truncated weights.bin at tensor '" + name + "'");
        it->second.copy_(buf);
        ++loaded;
    }
    if (loaded != targets.size()) throw io::IoError("checkpoint is missing model tensors");
}

mitigator::Mitigator load_model(const fs::path& dir, CheckpointInfo* info) {
    auto i = read_info(dir);
    const auto pipeline = apply_ablation(i.config.pipeline, i.config.train.ablation);
    mitigator::Mitigator model(pipeline.mitigator);
    load_weights(dir, model);
    if (info != nullptr) *info = std::move(i);
    return model;
}

bool load_optimizer(const fs::path& dir, torch::optim::Adam& optimizer) {
    const auto path = dir / "optimizer.pt";
    if (!fs::exists(path)) return false;
    torch::load(optimizer, path.string());
    return true;
}

}  // namespace turbrec::checkpoint
