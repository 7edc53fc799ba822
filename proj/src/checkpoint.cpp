#include "mplab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "mplab/errors.hpp"
#include "mplab/io.hpp"

namespace mplab {

namespace {

constexpr char kMagic[] = "MPLABCK1";
constexpr std::size_t kMagicLen = 8;

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");

std::vector<double> flatten(const AnyModel& model, std::vector<std::uint64_t>& dims, std::uint32_t& kind) {
    std::vector<double> params;
    if (const auto* lin = std::get_if<LinearModel>(&model)) {
        kind = 0;
        dims = {lin->weights.size()};
        params = lin->weights;
        params.push_back(lin->bias);
    } else {
        const auto& mlp = std::get<TinyMLP>(model);
        kind = 1;
        dims.push_back(mlp.layers.front().in);
        for (const auto& layer : mlp.layers) {
            dims.push_back(layer.out);
            params.insert(params.end(), layer.weights.begin(), layer.weights.end());
            params.insert(params.end(), layer.bias.begin(), layer.bias.end());
        }
    }
    return params;
}

AnyModel rebuild(std::uint32_t kind, const std::vector<std::uint64_t>& dims, const std::vector<double>& params) {
    if (kind == 0) {
        if (dims.size() != 1 || params.size() != dims[0] + 1) {
            throw IoError("checkpoint: linear parameter count does not match header");
        }
        Vec w(params.begin(), params.end() - 1);
        return LinearModel(std::move(w), params.back());
    }
    if (kind == 1) {
        if (dims.size() < 2) {
            throw IoError("checkpoint: mlp needs at least two widths");
        }
        std::vector<DenseLayer> layers;
        std::size_t pos = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            DenseLayer layer;
            layer.in = dims[l];
            layer.out = dims[l + 1];
            std::size_t need = layer.in * layer.out + layer.out;
            if (pos + need > params.size()) {
                throw IoError("checkpoint: truncated mlp parameters");
            }
            layer.weights.assign(params.begin() + pos, params.begin() + pos + layer.in * layer.out);
            pos += layer.in * layer.out;
            layer.bias.assign(params.begin() + pos, params.begin() + pos + layer.out);
            pos += layer.out;
            layers.push_back(std::move(layer));
        }
        if (pos != params.size()) {
            throw IoError("checkpoint: trailing mlp parameters");
        }
        return TinyMLP(std::move(layers));
    }
    throw IoError("checkpoint: unknown model kind");
}

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) {
        throw IoError("checkpoint: unexpected end of binary data");
    }
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::string encode_checkpoint(const AnyModel& model, CheckpointFormat format) {
    std::vector<std::uint64_t> dims;
    std::uint32_t kind = 0;
    std::vector<double> params = flatten(model, dims, kind);

    if (format == CheckpointFormat::binary) {
        std::string out(kMagic, kMagicLen);
        put<std::uint32_t>(out, kind);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
        for (auto d : dims) put<std::uint64_t>(out, d);
        for (double p : params) put<double>(out, p);
        return out;
    }

    std::string out = kind == 0 ? "linear" : "mlp " + std::to_string(dims.size() - 1);
    for (auto d : dims) out += " " + std::to_string(d);
    out += "\n";
    for (double p : params) {
        out += fmt17(p);
        out += "\n";
    }
    return out;
}

namespace {

AnyModel decode_unchecked(const std::string& bytes) {
    if (bytes.size() >= kMagicLen && bytes.compare(0, kMagicLen, kMagic) == 0) {
        std::size_t pos = kMagicLen;
        auto kind = take<std::uint32_t>(bytes, pos);
        auto ndims = take<std::uint32_t>(bytes, pos);
        std::vector<std::uint64_t> dims(ndims);
        for (auto& d : dims) d = take<std::uint64_t>(bytes, pos);
        if ((bytes.size() - pos) % sizeof(double) != 0) {
            throw IoError("checkpoint: binary payload is not a whole number of float64 values");
        }
        std::vector<double> params((bytes.size() - pos) / sizeof(double));
        for (auto& p : params) p = take<double>(bytes, pos);
        return rebuild(kind, dims, params);
    }

    std::istringstream in(bytes);
    std::string tag;
    in >> tag;
    std::uint32_t kind = 0;
    std::vector<std::uint64_t> dims;
    if (tag == "linear") {
        std::uint64_t k = 0;
        if (!(in >> k)) throw IoError("checkpoint: missing linear dimension");
        dims = {k};
    } else if (tag == "mlp") {
        kind = 1;
        std::size_t nlayers = 0;
        if (!(in >> nlayers)) throw IoError("checkpoint: missing layer count");
        dims.resize(nlayers + 1);
        for (auto& d : dims) {
            if (!(in >> d)) throw IoError("checkpoint: missing layer width");
        }
    } else {
        throw IoError("checkpoint: unrecognised header '" + tag + "'");
    }
    std::vector<double> params;
    std::string tok;
    while (in >> tok) {
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
            throw IoError("checkpoint: bad number '" + tok + "'");
        }
        params.push_back(v);
    }
    return rebuild(kind, dims, params);
}

}  // namespace

AnyModel decode_checkpoint(const std::string& bytes) {
    try {
        return decode_unchecked(bytes);
    } catch (const ContractViolation& e) {
        throw IoError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const AnyModel& model, const std::filesystem::path& path, CheckpointFormat format) {
    write_file_atomic(path, encode_checkpoint(model, format));
}

AnyModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace mplab
