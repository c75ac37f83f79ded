#include "diffrl/network.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace diffrl {

using nlohmann::json;

std::size_t SplitEmbedConcat::in_width() const {
    std::size_t w = 0;
    for (const auto &s : segments)
        w += s.length;
    return w;
}

std::size_t SplitEmbedConcat::out_width() const {
    std::size_t w = 0;
    for (const auto &s : segments)
        w += s.map.out_width();
    return w;
}

std::size_t layer_in_width(const Layer &l) {
    if (const auto *a = std::get_if<AffineLayer>(&l))
        return a->in_width();
    if (const auto *s = std::get_if<SplitEmbedConcat>(&l))
        return s->in_width();
    return 0; // Relu: same as incoming
}

std::size_t layer_out_width(const Layer &l, std::size_t in_width) {
    if (const auto *a = std::get_if<AffineLayer>(&l))
        return a->out_width();
    if (const auto *s = std::get_if<SplitEmbedConcat>(&l))
        return s->out_width();
    return in_width;
}

const char *layer_kind_name(const Layer &l) {
    if (std::holds_alternative<AffineLayer>(l))
        return "affine";
    if (std::holds_alternative<SplitEmbedConcat>(l))
        return "split_embed_concat";
    return "relu";
}

std::size_t Network::output_width() const {
    std::size_t w = input_width;
    for (const auto &l : layers)
        w = layer_out_width(l, w);
    return w;
}

namespace {

void validate_affine(const AffineLayer &a, const std::string &where) {
    if (a.bias.size() != a.weights.rows)
        throw ValidationError(where + ": bias length " + std::to_string(a.bias.size()) +
                              " != weight rows " + std::to_string(a.weights.rows));
    if (!all_finite(a.weights.data))
        throw ValidationError(where + ": non-finite weight entry");
    if (!all_finite(a.bias))
        throw ValidationError(where + ": non-finite bias entry");
}

} // namespace

void validate_network(const Network &net) {
    if (net.input_width == 0)
        throw ValidationError("network '" + net.name + "': input_width must be positive");
    if (net.layers.empty())
        throw ValidationError("network '" + net.name + "': no layers");

    std::size_t width = net.input_width;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const std::string where = "layer " + std::to_string(i) + " (" +
                                  layer_kind_name(net.layers[i]) + ")";
        if (const auto *a = std::get_if<AffineLayer>(&net.layers[i])) {
            validate_affine(*a, where);
            if (a->in_width() != width)
                throw ValidationError(where + ": expects " + std::to_string(a->in_width()) +
                                      " inputs but incoming width is " + std::to_string(width));
            width = a->out_width();
        } else if (const auto *s = std::get_if<SplitEmbedConcat>(&net.layers[i])) {
            if (s->segments.empty())
                throw ValidationError(where + ": no segments");
            std::size_t expect_offset = 0;
            for (std::size_t k = 0; k < s->segments.size(); ++k) {
                const auto &seg = s->segments[k];
                const std::string seg_where = where + " segment " + std::to_string(k);
                if (seg.offset != expect_offset)
                    throw ValidationError(seg_where + ": offset " + std::to_string(seg.offset) +
                                          " leaves a gap or overlap (expected " +
                                          std::to_string(expect_offset) + ")");
                if (seg.length == 0)
                    throw ValidationError(seg_where + ": empty segment");
                validate_affine(seg.map, seg_where);
                if (seg.map.in_width() != seg.length)
                    throw ValidationError(seg_where + ": embedding consumes " +
                                          std::to_string(seg.map.in_width()) +
                                          " inputs, segment length is " +
                                          std::to_string(seg.length));
                expect_offset += seg.length;
            }
            if (expect_offset != width)
                throw ValidationError(where + ": segments tile " + std::to_string(expect_offset) +
                                      " inputs but incoming width is " + std::to_string(width));
            width = s->out_width();
        }
        // Relu keeps the width.
    }

    if (!std::holds_alternative<AffineLayer>(net.layers.back()) &&
        !std::holds_alternative<SplitEmbedConcat>(net.layers.back()))
        throw ValidationError("network '" + net.name + "': final layer must be affine (raw logits)");

    const std::size_t out = width;
    if (net.decoder.mode == ActionDecoder::Mode::Discrete) {
        if (net.decoder.action_values.size() != out)
            throw ValidationError("decoder: " + std::to_string(net.decoder.action_values.size()) +
                                  " action values for " + std::to_string(out) + " outputs");
        if (!all_finite(net.decoder.action_values))
            throw ValidationError("decoder: non-finite action value");
        for (std::size_t i = 1; i < net.decoder.action_values.size(); ++i)
            if (!(net.decoder.action_values[i - 1] < net.decoder.action_values[i]))
                throw ValidationError("decoder: action values not strictly increasing at index " +
                                      std::to_string(i));
    } else {
        if (net.decoder.mean_index >= out)
            throw ValidationError("decoder: mean_index " + std::to_string(net.decoder.mean_index) +
                                  " out of range for " + std::to_string(out) + " outputs");
        if (!(net.decoder.sigma > 0.0))
            throw ValidationError("decoder: sigma must be positive");
    }
}

std::size_t parameter_count(const Network &net) {
    std::size_t n = 0;
    auto count_affine = [&](const AffineLayer &a) { n += a.weights.rows * a.weights.cols + a.bias.size(); };
    for (const auto &l : net.layers) {
        if (const auto *a = std::get_if<AffineLayer>(&l))
            count_affine(*a);
        else if (const auto *s = std::get_if<SplitEmbedConcat>(&l))
            for (const auto &seg : s->segments)
                count_affine(seg.map);
    }
    return n;
}

namespace {

void affine_apply(const AffineLayer &a, std::span<const double> in, Vec &out) {
    out.resize(a.out_width());
    for (std::size_t r = 0; r < a.weights.rows; ++r) {
        double acc = 0.0;
        const double *w = a.weights.data.data() + r * a.weights.cols;
        for (std::size_t c = 0; c < a.weights.cols; ++c)
            acc += w[c] * in[c];
        out[r] = acc + a.bias[r];
    }
}

} // namespace

Vec forward(const Network &net, std::span<const double> x) {
    if (x.size() != net.input_width)
        throw ValidationError("forward: input has " + std::to_string(x.size()) +
                              " entries, network expects " + std::to_string(net.input_width));
    Vec cur(x.begin(), x.end());
    Vec next;
    for (const auto &l : net.layers) {
        if (const auto *a = std::get_if<AffineLayer>(&l)) {
            affine_apply(*a, cur, next);
            cur.swap(next);
        } else if (const auto *s = std::get_if<SplitEmbedConcat>(&l)) {
            next.clear();
            Vec seg_out;
            for (const auto &seg : s->segments) {
                affine_apply(seg.map, std::span<const double>(cur).subspan(seg.offset, seg.length),
                             seg_out);
                next.insert(next.end(), seg_out.begin(), seg_out.end());
            }
            cur.swap(next);
        } else {
            for (double &v : cur)
                v = v > 0.0 ? v : 0.0;
        }
    }
    return cur;
}

std::size_t argmax_lowest_tie(std::span<const double> logits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best])
            best = i;
    return best;
}

double decode_action(const Network &net, std::span<const double> logits) {
    if (logits.size() != net.output_width())
        throw ValidationError("decode_action: " + std::to_string(logits.size()) +
                              " logits for " + std::to_string(net.output_width()) + " outputs");
    if (net.decoder.mode == ActionDecoder::Mode::Discrete)
        return net.decoder.action_values[argmax_lowest_tie(logits)];
    return logits[net.decoder.mean_index];
}

namespace {

Matrix parse_matrix(const json &j, const std::string &where) {
    if (!j.is_array() || j.empty())
        throw ParseError(where + ": weights must be a non-empty array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0)
        throw ParseError(where + ": empty weight row");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw ParseError(where + ": ragged weight row " + std::to_string(r));
        for (std::size_t c = 0; c < cols; ++c)
            m.at(r, c) = j[r][c].get<double>();
    }
    return m;
}

AffineLayer parse_affine(const json &j, const std::string &where) {
    AffineLayer a;
    a.weights = parse_matrix(j.at("weights"), where);
    a.bias = j.at("bias").get<Vec>();
    return a;
}

json affine_to_json(const AffineLayer &a) {
    json rows = json::array();
    for (std::size_t r = 0; r < a.weights.rows; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < a.weights.cols; ++c)
            row.push_back(a.weights.at(r, c));
        rows.push_back(std::move(row));
    }
    return {{"weights", std::move(rows)}, {"bias", a.bias}};
}

} // namespace

Network parse_network(const std::string &text, const std::string &origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw ParseError(origin + ": " + e.what());
    }

    Network net;
    try {
        net.name = j.at("name").get<std::string>();
        net.input_width = j.at("input_width").get<std::size_t>();
        for (std::size_t i = 0; i < j.at("layers").size(); ++i) {
            const json &lj = j["layers"][i];
            const std::string where = origin + ": layer " + std::to_string(i);
            const std::string kind = lj.at("kind").get<std::string>();
            if (kind == "affine") {
                net.layers.emplace_back(parse_affine(lj, where));
            } else if (kind == "relu") {
                net.layers.emplace_back(ReluLayer{});
            } else if (kind == "split_embed_concat") {
                SplitEmbedConcat sec;
                for (const json &sj : lj.at("segments")) {
                    SegmentEmbed seg;
                    seg.offset = sj.at("offset").get<std::size_t>();
                    seg.length = sj.at("length").get<std::size_t>();
                    seg.map = parse_affine(sj, where);
                    sec.segments.push_back(std::move(seg));
                }
                net.layers.emplace_back(std::move(sec));
            } else {
                throw ParseError(where + ": unknown layer kind '" + kind + "'");
            }
        }
        const json &dj = j.at("decoder");
        const std::string mode = dj.at("mode").get<std::string>();
        if (mode == "discrete") {
            net.decoder = ActionDecoder::discrete(dj.at("action_values").get<Vec>());
        } else if (mode == "continuous_mean") {
            net.decoder = ActionDecoder::continuous_mean(dj.at("mean_index").get<std::size_t>(),
                                                         dj.at("sigma").get<double>());
        } else {
            throw ParseError(origin + ": unknown decoder mode '" + mode + "'");
        }
    } catch (const json::exception &e) {
        throw ParseError(origin + ": " + e.what());
    }

    validate_network(net);
    return net;
}

Network load_network(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open network file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str(), path);
}

std::string network_to_json(const Network &net) {
    json j;
    j["name"] = net.name;
    j["input_width"] = net.input_width;
    json layers = json::array();
    for (const auto &l : net.layers) {
        if (const auto *a = std::get_if<AffineLayer>(&l)) {
            json lj = affine_to_json(*a);
            lj["kind"] = "affine";
            layers.push_back(std::move(lj));
        } else if (const auto *s = std::get_if<SplitEmbedConcat>(&l)) {
            json segs = json::array();
            for (const auto &seg : s->segments) {
                json sj = affine_to_json(seg.map);
                sj["offset"] = seg.offset;
                sj["length"] = seg.length;
                segs.push_back(std::move(sj));
            }
            layers.push_back({{"kind", "split_embed_concat"}, {"segments", std::move(segs)}});
        } else {
            layers.push_back({{"kind", "relu"}});
        }
    }
    j["layers"] = std::move(layers);
    if (net.decoder.mode == ActionDecoder::Mode::Discrete)
        j["decoder"] = {{"mode", "discrete"}, {"action_values", net.decoder.action_values}};
    else
        j["decoder"] = {{"mode", "continuous_mean"},
                        {"mean_index", net.decoder.mean_index},
                        {"sigma", net.decoder.sigma}};
    return j.dump(2);
}

void save_network(const Network &net, const std::string &path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out)
            throw ParseError("cannot write network file '" + path + "'");
        out << network_to_json(net) << "\n";
    }
    std::rename(tmp.c_str(), path.c_str());
}

} // namespace diffrl
