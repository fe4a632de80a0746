#pragma once

// Darknet-style network configuration parsing and shape inference.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wclust/error.hpp"

namespace wclust {

struct TensorShape {
    int h = 1;
    int w = 1;
    int c = 1;

    std::uint64_t elements() const {
        return static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w) *
               static_cast<std::uint64_t>(c);
    }
    bool operator==(const TensorShape&) const = default;
};

enum class Activation { linear, leaky };

struct ConvSpec {
    int filters = 1;
    int kernel = 1;
    int stride = 1;
    int pad = 0;  // resolved zero-padding rows/cols per side
    bool batch_normalize = false;
    Activation activation = Activation::linear;
    bool operator==(const ConvSpec&) const = default;
};

struct ShortcutSpec {
    int from = 0;  // absolute layer index
    bool operator==(const ShortcutSpec&) const = default;
};

struct RouteSpec {
    std::vector<int> sources;  // absolute layer indices, 1 or 2 entries
    bool operator==(const RouteSpec&) const = default;
};

struct UpsampleSpec {
    int factor = 2;
    bool operator==(const UpsampleSpec&) const = default;
};

struct YoloSpec {
    std::vector<int> mask;
    std::vector<int> anchors;
    int classes = 80;
    int num = 9;
    bool operator==(const YoloSpec&) const = default;
};

using LayerKind = std::variant<ConvSpec, ShortcutSpec, RouteSpec, UpsampleSpec, YoloSpec>;

struct LayerSpec {
    LayerKind kind;
    TensorShape in_shape;
    TensorShape out_shape;

    bool is_conv() const { return std::holds_alternative<ConvSpec>(kind); }
    const ConvSpec& conv() const { return std::get<ConvSpec>(kind); }
    bool operator==(const LayerSpec&) const = default;
};

struct NetworkDef {
    TensorShape input;
    std::vector<LayerSpec> layers;
    bool operator==(const NetworkDef&) const = default;
};

inline const char* kind_name(const LayerKind& kind) {
    constexpr const char* names[] = {"convolutional", "shortcut", "route", "upsample", "yolo"};
    return names[kind.index()];
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline int parse_int(std::string_view text, std::size_t line) {
    text = trim(text);
    int value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("expected integer, got '" + std::string(text) + "'", line);
    return value;
}

inline std::vector<int> parse_int_list(std::string_view text, std::size_t line) {
    std::vector<int> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto item = trim(text.substr(0, comma));
        if (!item.empty()) out.push_back(parse_int(item, line));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

struct Section {
    std::string name;
    std::size_t line = 0;
    std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> values;

    bool has(std::string_view key) const { return values.find(key) != values.end(); }

    int get_int(std::string_view key, int fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : parse_int(it->second.first, it->second.second);
    }

    int require_int(std::string_view key) const {
        auto it = values.find(key);
        if (it == values.end())
            throw ConfigError("[" + name + "] missing required key '" + std::string(key) + "'", line);
        return parse_int(it->second.first, it->second.second);
    }

    std::string get_str(std::string_view key, std::string fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second.first;
    }
};

inline std::vector<Section> split_sections(std::string_view text) {
    std::vector<Section> sections;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            sections.push_back({std::string(trim(line.substr(1, line.size() - 2))), line_no, {}});
            continue;
        }
        if (sections.empty()) throw ConfigError("key/value line before any section", line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected key=value", line_no);
        sections.back().values[std::string(trim(line.substr(0, eq)))] = {
            std::string(trim(line.substr(eq + 1))), line_no};
    }
    return sections;
}

inline int resolve_index(int raw, int current, const Section& s) {
    const int absolute = raw < 0 ? current + raw : raw;
    if (absolute < 0 || absolute >= current)
        throw ConfigError("[" + s.name + "] layer index " + std::to_string(raw) +
                              " out of range for layer " + std::to_string(current),
                          s.line);
    return absolute;
}

inline Activation parse_activation(const Section& s) {
    const auto name = s.get_str("activation", "linear");
    if (name == "linear") return Activation::linear;
    if (name == "leaky") return Activation::leaky;
    throw ConfigError("unsupported activation '" + name + "'", s.line);
}

}  // namespace detail

/// Parses a Darknet `.cfg` text. Shapes are left default; call infer_shapes().
inline NetworkDef parse_config(std::string_view text) {
    auto sections = detail::split_sections(text);
    if (sections.empty()) throw ConfigError("empty configuration");

    const auto& head = sections.front();
    if (head.name != "net" && head.name != "network")
        throw ConfigError("first section must be [net] or [network]", head.line);

    NetworkDef net;
    for (const char* key : {"width", "height", "channels"})
        if (!head.has(key))
            throw ConfigError(std::string("[net] missing input dimension '") + key + "'", head.line);
    net.input = {head.require_int("height"), head.require_int("width"), head.require_int("channels")};
    if (net.input.h < 1 || net.input.w < 1 || net.input.c < 1)
        throw ConfigError("input dimensions must be positive", head.line);

    for (std::size_t i = 1; i < sections.size(); ++i) {
        const auto& s = sections[i];
        const int index = static_cast<int>(net.layers.size());
        LayerSpec layer;

        if (s.name == "convolutional") {
            ConvSpec conv;
            conv.filters = s.get_int("filters", 1);
            conv.kernel = s.get_int("size", 1);
            conv.stride = s.get_int("stride", 1);
            if (conv.kernel <= 0) throw ConfigError("kernel size must be positive", s.line);
            if (conv.stride <= 0) throw ConfigError("stride must be positive", s.line);
            if (conv.filters <= 0) throw ConfigError("filters must be positive", s.line);
            // Darknet: `pad` is a flag for same-style padding, `padding` an explicit amount.
            conv.pad = s.has("padding") ? s.get_int("padding", 0)
                                        : (s.get_int("pad", 0) ? conv.kernel / 2 : 0);
            if (conv.pad < 0) throw ConfigError("padding must be non-negative", s.line);
            conv.batch_normalize = s.get_int("batch_normalize", 0) != 0;
            conv.activation = detail::parse_activation(s);
            layer.kind = conv;
        } else if (s.name == "shortcut") {
            layer.kind = ShortcutSpec{detail::resolve_index(s.require_int("from"), index, s)};
        } else if (s.name == "route") {
            if (!s.has("layers")) throw ConfigError("[route] missing 'layers'", s.line);
            const auto& [raw, line] = s.values.find("layers")->second;
            RouteSpec route;
            for (int v : detail::parse_int_list(raw, line))
                route.sources.push_back(detail::resolve_index(v, index, s));
            if (route.sources.empty() || route.sources.size() > 2)
                throw ConfigError("[route] takes one or two source layers", s.line);
            layer.kind = route;
        } else if (s.name == "upsample") {
            const int factor = s.get_int("stride", 2);
            if (factor != 2) throw ConfigError("only factor-2 upsample is supported", s.line);
            layer.kind = UpsampleSpec{factor};
        } else if (s.name == "yolo") {
            YoloSpec yolo;
            if (s.has("mask")) {
                const auto& [raw, line] = s.values.find("mask")->second;
                yolo.mask = detail::parse_int_list(raw, line);
            }
            if (s.has("anchors")) {
                const auto& [raw, line] = s.values.find("anchors")->second;
                yolo.anchors = detail::parse_int_list(raw, line);
            }
            yolo.classes = s.get_int("classes", 80);
            yolo.num = s.get_int("num", 1);
            layer.kind = yolo;
        } else {
            throw ConfigError("unknown section [" + s.name + "]", s.line);
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

/// Fills in_shape/out_shape of every layer. Output rows follow
/// O = (I - K + 2P) / S + 1 with floor division.
inline NetworkDef infer_shapes(NetworkDef net) {
    TensorShape current = net.input;
    const auto where = [](std::size_t i) { return "layer " + std::to_string(i) + ": "; };

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& layer = net.layers[i];
        layer.in_shape = current;
        TensorShape out = current;

        if (const auto* conv = std::get_if<ConvSpec>(&layer.kind)) {
            const int oh = (current.h - conv->kernel + 2 * conv->pad) / conv->stride + 1;
            const int ow = (current.w - conv->kernel + 2 * conv->pad) / conv->stride + 1;
            if (current.h - conv->kernel + 2 * conv->pad < 0 ||
                current.w - conv->kernel + 2 * conv->pad < 0 || oh < 1 || ow < 1)
                throw ShapeError(where(i) + "convolution produces a non-positive output size");
            out = {oh, ow, conv->filters};
        } else if (const auto* sc = std::get_if<ShortcutSpec>(&layer.kind)) {
            if (net.layers[sc->from].out_shape != current)
                throw ShapeError(where(i) + "shortcut operands differ in shape");
        } else if (const auto* route = std::get_if<RouteSpec>(&layer.kind)) {
            out = net.layers[route->sources.front()].out_shape;
            for (std::size_t k = 1; k < route->sources.size(); ++k) {
                const auto& other = net.layers[route->sources[k]].out_shape;
                if (other.h != out.h || other.w != out.w)
                    throw ShapeError(where(i) + "route concatenation with mismatched h/w");
                out.c += other.c;
            }
        } else if (const auto* up = std::get_if<UpsampleSpec>(&layer.kind)) {
            out = {current.h * up->factor, current.w * up->factor, current.c};
        }
        layer.out_shape = out;
        current = out;
    }
    return net;
}

inline NetworkDef load_network(std::string_view text) { return infer_shapes(parse_config(text)); }

/// Writes a canonical config that parse_config() reads back to an identical NetworkDef.
inline std::string serialize_config(const NetworkDef& net) {
    std::ostringstream os;
    os << "[net]\nwidth=" << net.input.w << "\nheight=" << net.input.h
       << "\nchannels=" << net.input.c << "\n";
    const auto join = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    for (const auto& layer : net.layers) {
        os << "\n[" << kind_name(layer.kind) << "]\n";
        if (const auto* conv = std::get_if<ConvSpec>(&layer.kind)) {
            if (conv->batch_normalize) os << "batch_normalize=1\n";
            os << "filters=" << conv->filters << "\nsize=" << conv->kernel
               << "\nstride=" << conv->stride << "\npadding=" << conv->pad << "\nactivation="
               << (conv->activation == Activation::leaky ? "leaky" : "linear") << "\n";
        } else if (const auto* sc = std::get_if<ShortcutSpec>(&layer.kind)) {
            os << "from=" << sc->from << "\n";
        } else if (const auto* route = std::get_if<RouteSpec>(&layer.kind)) {
            os << "layers=" << join(route->sources) << "\n";
        } else if (const auto* up = std::get_if<UpsampleSpec>(&layer.kind)) {
            os << "stride=" << up->factor << "\n";
        } else if (const auto* yolo = std::get_if<YoloSpec>(&layer.kind)) {
            if (!yolo->mask.empty()) os << "mask=" << join(yolo->mask) << "\n";
            if (!yolo->anchors.empty()) os << "anchors=" << join(yolo->anchors) << "\n";
            os << "classes=" << yolo->classes << "\nnum=" << yolo->num << "\n";
        }
    }
    return os.str();
}

/// Indices of convolutional layers, in network order.
inline std::vector<std::size_t> conv_layer_indices(const NetworkDef& net) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        if (net.layers[i].is_conv()) out.push_back(i);
    return out;
}

/// Number of kernel weights of a convolutional layer (biases and batch-norm excluded).
inline std::uint64_t conv_weight_count(const LayerSpec& layer) {
    const auto& conv = layer.conv();
    return static_cast<std::uint64_t>(conv.filters) * static_cast<std::uint64_t>(layer.in_shape.c) *
           static_cast<std::uint64_t>(conv.kernel) * static_cast<std::uint64_t>(conv.kernel);
}

}  // namespace wclust
