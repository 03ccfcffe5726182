#include "iron/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace iron {

namespace {

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* data, std::size_t n, const char* what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
        throw FormatError(std::string("truncated file while reading ") + what);
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
    write_bytes(out, &value, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T value{};
    read_bytes(in, &value, sizeof(T), what);
    return value;
}

void check_magic(std::ifstream& in, const char expected[4], const std::string& path) {
    char magic[4];
    read_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, expected, 4) != 0)
        throw FormatError("bad magic in " + path + ": expected \"" + std::string(expected, 4) + "\"");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path + " for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path + " for reading");
    return in;
}

}  // namespace

void write_tensor(const SimilarityTensor& tensor, const std::string& path) {
    tensor.validate();
    std::ofstream out = open_out(path);
    write_bytes(out, "IRNT", 4);
    write_pod<std::uint32_t>(out, kFormatVersion);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.grid.nodes_per_axis));
    for (double v : {tensor.grid.x.min, tensor.grid.x.max, tensor.grid.y.min, tensor.grid.y.max,
                     tensor.grid.z.min, tensor.grid.z.max})
        write_pod<double>(out, v);
    for (double v : tensor.values) write_pod<float>(out, static_cast<float>(v));
    if (!out) throw Error("write failed for " + path);
}

SimilarityTensor read_tensor(const std::string& path) {
    std::ifstream in = open_in(path);
    check_magic(in, "IRNT", path);
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kFormatVersion)
        throw FormatError("unsupported IRNT version " + std::to_string(version) + " in " + path);
    SimilarityTensor t;
    t.grid.nodes_per_axis = static_cast<int>(read_pod<std::uint32_t>(in, "grid size"));
    t.grid.x.min = read_pod<double>(in, "x.min");
    t.grid.x.max = read_pod<double>(in, "x.max");
    t.grid.y.min = read_pod<double>(in, "y.min");
    t.grid.y.max = read_pod<double>(in, "y.max");
    t.grid.z.min = read_pod<double>(in, "z.min");
    t.grid.z.max = read_pod<double>(in, "z.max");
    t.grid.validate();
    const std::size_t s = static_cast<std::size_t>(t.grid.nodes_per_axis);
    t.values.resize(s * s * s);
    for (double& v : t.values) v = static_cast<double>(read_pod<float>(in, "tensor value"));
    t.provenance = path;
    t.validate();
    return t;
}

namespace {

std::string model_header(IronModel& model) {
    std::ostringstream header;
    header << "ironw " << kFormatVersion << "\n";
    header << "input_edge " << model.input_edge << "\n";
    header << "bn_epsilon " << model.conv.front().bn.epsilon << "\n";
    header << "bn_momentum " << model.conv.front().bn.momentum << "\n";
    for (const TensorRef& t : model.all_tensors()) {
        header << t.name;
        for (int d : t.shape) header << ' ' << d;
        header << "\n";
    }
    return header.str();
}

}  // namespace

void write_model(IronModel& model, const std::string& path) {
    model.validate();
    const std::string header = model_header(model);
    std::ofstream out = open_out(path);
    write_bytes(out, "IRNW", 4);
    write_pod<std::uint32_t>(out, kFormatVersion);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
    write_bytes(out, header.data(), header.size());
    for (const TensorRef& t : model.all_tensors())
        for (double v : *t.data) write_pod<float>(out, static_cast<float>(v));
    if (!out) throw Error("write failed for " + path);
}

IronModel read_model(const std::string& path) {
    std::ifstream in = open_in(path);
    check_magic(in, "IRNW", path);
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kFormatVersion)
        throw FormatError("unsupported IRNW version " + std::to_string(version) + " in " + path);
    const auto header_len = read_pod<std::uint32_t>(in, "header length");
    std::string header(header_len, '\0');
    read_bytes(in, header.data(), header_len, "header");

    std::istringstream hs(header);
    std::string tag;
    std::uint32_t hver = 0;
    hs >> tag >> hver;
    if (tag != "ironw" || hver != kFormatVersion) throw FormatError("malformed IRNW header in " + path);
    int input_edge = 0;
    double bn_epsilon = 0.0, bn_momentum = 0.0;
    hs >> tag >> input_edge;
    if (tag != "input_edge") throw FormatError("malformed IRNW header: expected input_edge");
    hs >> tag >> bn_epsilon;
    if (tag != "bn_epsilon") throw FormatError("malformed IRNW header: expected bn_epsilon");
    hs >> tag >> bn_momentum;
    if (tag != "bn_momentum") throw FormatError("malformed IRNW header: expected bn_momentum");

    // Reconstruct the plan from the conv/fc weight shapes in the manifest.
    std::vector<int> channel_plan;
    std::vector<int> fc_plan;
    struct Entry {
        std::string name;
        std::vector<int> shape;
    };
    std::vector<Entry> entries;
    std::string line;
    std::getline(hs, line);  // consume end of the bn_momentum line
    while (std::getline(hs, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Entry e;
        ls >> e.name;
        int d;
        while (ls >> d) e.shape.push_back(d);
        if (e.name.empty() || e.shape.empty()) throw FormatError("malformed IRNW manifest line: " + line);
        entries.push_back(std::move(e));
        if (entries.back().name.find(".weight") != std::string::npos) {
            const Entry& e2 = entries.back();
            if (e2.name.rfind("conv", 0) == 0 && e2.shape.size() == 5) {
                if (channel_plan.empty()) channel_plan.push_back(e2.shape[1]);
                channel_plan.push_back(e2.shape[0]);
            } else if (e2.name.rfind("fc", 0) == 0 && e2.shape.size() == 2) {
                if (fc_plan.empty()) fc_plan.push_back(e2.shape[1]);
                fc_plan.push_back(e2.shape[0]);
            }
        }
    }
    if (channel_plan.size() < 2 || fc_plan.size() < 2)
        throw FormatError("IRNW manifest does not describe a complete layer plan");

    IronModel model = IronModel::build(channel_plan, fc_plan, input_edge, 0);
    for (ConvBlock& b : model.conv) {
        b.bn.epsilon = bn_epsilon;
        b.bn.momentum = bn_momentum;
    }
    // Validate the manifest against the reconstructed architecture, then
    // load the payload in manifest order.
    std::vector<TensorRef> tensors = model.all_tensors();
    if (tensors.size() != entries.size())
        throw FormatError("IRNW manifest tensor count mismatch: " + std::to_string(entries.size()) +
                          " declared, " + std::to_string(tensors.size()) + " expected");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name != entries[i].name || tensors[i].shape != entries[i].shape)
            throw FormatError("IRNW manifest mismatch at tensor " + entries[i].name);
    }
    for (TensorRef& t : tensors)
        for (double& v : *t.data) v = static_cast<double>(read_pod<float>(in, t.name.c_str()));
    model.validate();
    return model;
}

void write_dataset(const std::vector<TrainingSample>& samples, const std::string& path) {
    if (samples.empty()) throw ConfigError("refusing to write an empty dataset");
    const std::size_t sp = samples.front().input.size();
    std::uint32_t edge = 0;
    for (std::uint32_t e = 1; e <= 64; ++e)
        if (static_cast<std::size_t>(e) * e * e == sp) edge = e;
    if (edge == 0) throw ConfigError("dataset sample input is not a cube");
    std::ofstream out = open_out(path);
    write_bytes(out, "IRND", 4);
    write_pod<std::uint32_t>(out, kFormatVersion);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(samples.size()));
    write_pod<std::uint32_t>(out, edge);
    write_pod<std::uint32_t>(out, 3u);
    for (const TrainingSample& s : samples) {
        if (s.input.size() != sp) throw ConfigError("dataset samples have inconsistent shapes");
        write_bytes(out, s.input.data(), sp * sizeof(float));
        write_bytes(out, s.label.data(), 3 * sizeof(float));
    }
    if (!out) throw Error("write failed for " + path);
}

std::vector<TrainingSample> read_dataset(const std::string& path) {
    std::ifstream in = open_in(path);
    check_magic(in, "IRND", path);
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kFormatVersion)
        throw FormatError("unsupported IRND version " + std::to_string(version) + " in " + path);
    const auto count = read_pod<std::uint64_t>(in, "sample count");
    const auto edge = read_pod<std::uint32_t>(in, "sub-tensor edge");
    const auto arity = read_pod<std::uint32_t>(in, "label arity");
    if (edge < 3 || edge > 64) throw FormatError("implausible sub-tensor edge " + std::to_string(edge));
    if (arity != 3) throw FormatError("unsupported label arity " + std::to_string(arity));
    const std::size_t sp = static_cast<std::size_t>(edge) * edge * edge;
    std::vector<TrainingSample> samples(static_cast<std::size_t>(count));
    for (TrainingSample& s : samples) {
        s.input.resize(sp);
        read_bytes(in, s.input.data(), sp * sizeof(float), "sample input");
        read_bytes(in, s.label.data(), 3 * sizeof(float), "sample label");
    }
    return samples;
}

void write_loss_csv(const std::vector<double>& loss_history, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "epoch,mean_loss\n";
    out.precision(17);
    for (std::size_t e = 0; e < loss_history.size(); ++e) out << (e + 1) << ',' << loss_history[e] << '\n';
    if (!out) throw Error("write failed for " + path);
}

}  // namespace iron
