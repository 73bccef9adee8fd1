#include "petsplat/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

#include "petsplat/errors.hpp"

namespace petsplat {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

template <class T>
T load_le(const char* p) {
    static_assert(sizeof(T) == 4);
    std::uint32_t raw;
    std::memcpy(&raw, p, 4);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
    return std::bit_cast<T>(raw);
}

template <class T>
void store_le(std::string& out, T value) {
    static_assert(sizeof(T) == 4);
    auto raw = std::bit_cast<std::uint32_t>(value);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
    char buf[4];
    std::memcpy(buf, &raw, 4);
    out.append(buf, 4);
}

// ---------------------------------------------------------------- PLY

struct PlyLayout {
    std::size_t count = 0;
    std::map<std::string, std::size_t> column;  // name -> float index
    std::size_t stride = 0;                     // floats per vertex
    std::size_t data_offset = 0;
    int rest = 0;
};

PlyLayout parse_ply_header(const std::string& bytes, const std::string& name) {
    PlyLayout layout;
    const std::string end_marker = "end_header\n";
    const auto end = bytes.find(end_marker);
    if (bytes.rfind("ply\n", 0) != 0 || end == std::string::npos) {
        throw FormatError(name + ": not a PLY file");
    }
    layout.data_offset = end + end_marker.size();
    std::istringstream header(bytes.substr(0, end));
    std::string line;
    bool saw_vertex = false;
    bool saw_format = false;
    while (std::getline(header, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw.empty() || kw == "ply" || kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") throw FormatError(name + ": ascii PLY is not supported, expected binary_little_endian");
            if (fmt == "binary_big_endian") throw FormatError(name + ": big-endian PLY is not supported");
            if (fmt != "binary_little_endian") throw FormatError(name + ": unknown PLY format '" + fmt + "'");
            saw_format = true;
        } else if (kw == "element") {
            std::string element;
            std::size_t count = 0;
            ls >> element >> count;
            if (element != "vertex") throw FormatError(name + ": unexpected element '" + element + "'");
            if (saw_vertex) throw FormatError(name + ": duplicate vertex element");
            saw_vertex = true;
            layout.count = count;
        } else if (kw == "property") {
            std::string type, prop;
            ls >> type;
            if (type == "list") throw FormatError(name + ": list properties are not supported");
            ls >> prop;
            if (!saw_vertex) throw FormatError(name + ": property '" + prop + "' before vertex element");
            if (type != "float" && type != "float32") {
                throw FormatError(name + ": property '" + prop + "' has type " + type + ", expected float");
            }
            if (layout.column.count(prop)) throw FormatError(name + ": duplicate property '" + prop + "'");
            layout.column[prop] = layout.stride++;
        } else {
            throw FormatError(name + ": unexpected header line '" + line + "'");
        }
    }
    if (!saw_format) throw FormatError(name + ": missing format line");
    if (!saw_vertex) throw FormatError(name + ": missing vertex element");

    static const std::array<const char*, 17> required{"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                                                      "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                                                      "rot_2", "rot_3", "x", "y", "z"};
    for (const char* r : required) {
        if (!layout.column.count(r)) throw FormatError(name + ": missing property '" + std::string(r) + "'");
    }
    int max_rest = -1;
    std::size_t rest_count = 0;
    for (const auto& [prop, _] : layout.column) {
        static const std::array<const char*, 17> known{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
                                                       "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
                                                       "rot_1", "rot_2", "rot_3"};
        if (std::find(known.begin(), known.end(), prop) != known.end()) continue;
        if (prop.rfind("f_rest_", 0) == 0) {
            const std::string digits = prop.substr(7);
            if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
                throw FormatError(name + ": unknown property '" + prop + "'");
            }
            max_rest = std::max(max_rest, std::stoi(digits));
            ++rest_count;
            continue;
        }
        throw FormatError(name + ": unknown property '" + prop + "'");
    }
    if (rest_count != static_cast<std::size_t>(max_rest + 1)) {
        throw FormatError(name + ": f_rest properties are not contiguous from f_rest_0");
    }
    int degree = -1;
    for (int d = 0; d <= 3; ++d) {
        if (sh_rest_count(d) == rest_count) degree = d;
    }
    if (degree < 0) throw FormatError(name + ": " + std::to_string(rest_count) + " f_rest properties match no SH degree");
    layout.rest = degree;

    const std::size_t expected = layout.count * layout.stride * 4;
    if (bytes.size() - layout.data_offset != expected) {
        throw FormatError(name + ": vertex data is " + std::to_string(bytes.size() - layout.data_offset) +
                          " bytes, header implies " + std::to_string(expected));
    }
    return layout;
}

// ---------------------------------------------------------------- JSON helpers

double finite_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw FormatError(where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw FormatError(where + ": value is not finite");
    return v;
}

Vec3 json_to_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw FormatError(where + ": expected a 3-vector");
    return {finite_number(j[0], where), finite_number(j[1], where), finite_number(j[2], where)};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::vector<Vec3> json_to_points(const json& j, const std::string& where) {
    if (!j.is_array()) throw FormatError(where + ": expected an array of 3-vectors");
    std::vector<Vec3> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(json_to_vec3(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

json points_to_json(const std::vector<Vec3>& pts) {
    json a = json::array();
    for (const Vec3& p : pts) a.push_back(vec3_to_json(p));
    return a;
}

Eigen::VectorXd json_to_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw FormatError(where + ": expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = finite_number(j[i], where);
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::MatrixXd json_to_matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& where) {
    if (!j.is_array() || j.size() != rows) {
        throw FormatError(where + ": expected " + std::to_string(rows) + " rows");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            throw FormatError(where + ": row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = finite_number(j[r][c], where);
        }
    }
    return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(std::move(row));
    }
    return a;
}

json parse_json(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& doc) {
    write_file(path, doc.dump() + "\n");
}

AvatarParams params_from_json(const json& j, const ArticulatedModel& model, const std::string& where) {
    if (!j.is_object()) throw FormatError(where + ": expected an object");
    AvatarParams p = AvatarParams::canonical(model);
    if (j.contains("beta")) p.beta = json_to_vector(j.at("beta"), where + ".beta");
    if (j.contains("theta")) p.theta = json_to_vector(j.at("theta"), where + ".theta");
    if (j.contains("trans")) p.trans = json_to_vec3(j.at("trans"), where + ".trans");
    if (j.contains("offsets")) p.offsets = json_to_points(j.at("offsets"), where + ".offsets");
    try {
        check_dimensions(model, p);
    } catch (const ParameterShapeError& e) {
        throw ParameterShapeError(where + ": " + e.what());
    }
    return p;
}

json params_to_json(const AvatarParams& p) {
    return json{{"beta", vector_to_json(p.beta)},
                {"theta", vector_to_json(p.theta)},
                {"trans", vec3_to_json(p.trans)},
                {"offsets", points_to_json(p.offsets)}};
}

// Rounds a unit quaternion to floats that the reader's normalization maps
// back onto themselves, so re-saving a loaded file reproduces its bytes.
std::array<float, 4> stable_float_quat(const Quat& q) {
    using F4 = std::array<float, 4>;
    auto to_floats = [](const Quat& u) {
        return F4{static_cast<float>(u.w()), static_cast<float>(u.x()), static_cast<float>(u.y()),
                  static_cast<float>(u.z())};
    };
    // Same arithmetic as read_splats.
    auto reread = [&](const F4& f) {
        Quat back(f[0], f[1], f[2], f[3]);
        back.normalize();
        return to_floats(back);
    };
    // Casting first keeps an already-stable quaternion (one that came from a
    // file) exactly as it was; renormalizing it again can move the last bit.
    const Quat unit = std::abs(q.norm() - 1.0) < 1e-6 ? q : q.normalized();
    const F4 base = to_floats(unit);
    F4 f = base;
    for (int iter = 0; iter < 8; ++iter) {
        const F4 next = reread(f);
        if (next == f) return f;
        f = next;
    }
    // Rounding occasionally cycles. Some neighbour within one ulp per
    // component is always stable; take the closest one.
    F4 best = base;
    double best_err = std::numeric_limits<double>::infinity();
    for (int combo = 0; combo < 81; ++combo) {
        F4 h = base;
        int r = combo;
        for (int c = 0; c < 4; ++c, r /= 3) {
            const int d = r % 3 - 1;
            if (d != 0) h[c] = std::nextafter(h[c], d > 0 ? std::numeric_limits<float>::infinity()
                                                           : -std::numeric_limits<float>::infinity());
        }
        if (reread(h) != h) continue;
        const double err = Eigen::Vector4d(h[0] - unit.w(), h[1] - unit.x(), h[2] - unit.y(), h[3] - unit.z())
                               .squaredNorm();
        if (err < best_err) {
            best_err = err;
            best = h;
        }
    }
    return best;
}

}  // namespace

SplatSet read_splats(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const PlyLayout layout = parse_ply_header(bytes, path.string());
    const char* data = bytes.data() + layout.data_offset;
    SplatSet set;
    set.sh_degree = layout.rest;
    set.splats.resize(layout.count);
    const std::size_t rest = sh_rest_count(layout.rest);
    std::vector<std::size_t> rest_cols(rest);
    for (std::size_t k = 0; k < rest; ++k) rest_cols[k] = layout.column.at("f_rest_" + std::to_string(k));

    for (std::size_t i = 0; i < layout.count; ++i) {
        const char* row = data + i * layout.stride * 4;
        auto get = [&](const std::string& prop) {
            const float v = load_le<float>(row + 4 * layout.column.at(prop));
            if (!std::isfinite(v)) {
                throw FormatError(path.string() + ": non-finite value in property '" + prop + "' of vertex " +
                                  std::to_string(i));
            }
            return static_cast<double>(v);
        };
        Splat& s = set.splats[i];
        s.position = Vec3(get("x"), get("y"), get("z"));
        s.sh_dc = Vec3(get("f_dc_0"), get("f_dc_1"), get("f_dc_2"));
        s.opacity_logit = get("opacity");
        s.log_scale = Vec3(get("scale_0"), get("scale_1"), get("scale_2"));
        Quat q(get("rot_0"), get("rot_1"), get("rot_2"), get("rot_3"));
        if (!(q.norm() > 0.0)) throw FormatError(path.string() + ": zero quaternion at vertex " + std::to_string(i));
        q.normalize();
        s.rotation = q;
        s.sh_rest.resize(rest);
        for (std::size_t k = 0; k < rest; ++k) {
            s.sh_rest[k] = get("f_rest_" + std::to_string(k));
        }
    }
    return set;
}

void write_splats(const std::filesystem::path& path, const SplatSet& set) {
    const std::size_t rest = sh_rest_count(set.sh_degree);
    std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(set.size()) + "\n";
    for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        out += "property float " + std::string(p) + "\n";
    }
    for (std::size_t k = 0; k < rest; ++k) out += "property float f_rest_" + std::to_string(k) + "\n";
    for (const char* p : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        out += "property float " + std::string(p) + "\n";
    }
    out += "end_header\n";
    out.reserve(out.size() + set.size() * (17 + rest) * 4);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Splat& s = set.splats[i];
        if (s.sh_rest.size() != rest) {
            throw FormatError("splat " + std::to_string(i) + " has " + std::to_string(s.sh_rest.size()) +
                              " SH rest coefficients, degree implies " + std::to_string(rest));
        }
        auto put = [&](double v) { store_le(out, static_cast<float>(v)); };
        put(s.position.x());
        put(s.position.y());
        put(s.position.z());
        put(0.0);
        put(0.0);
        put(0.0);
        for (int c = 0; c < 3; ++c) put(s.sh_dc[c]);
        for (double v : s.sh_rest) put(v);
        put(s.opacity_logit);
        for (int c = 0; c < 3; ++c) put(s.log_scale[c]);
        for (float v : stable_float_quat(s.rotation)) store_le(out, v);
    }
    write_file(path, out);
}

Mesh read_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Mesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "v") {
            Vec3 v;
            if (!(ls >> v.x() >> v.y() >> v.z())) throw FormatError(where + ": malformed vertex");
            if (!v.allFinite()) throw FormatError(where + ": vertex is not finite");
            mesh.vertices.push_back(v);
        } else if (kw == "f") {
            std::vector<long> idx;
            std::string tok;
            while (ls >> tok) {
                const std::string head = tok.substr(0, tok.find('/'));
                char* end = nullptr;
                const long v = std::strtol(head.c_str(), &end, 10);
                if (head.empty() || *end != '\0' || v == 0) throw FormatError(where + ": bad face index '" + tok + "'");
                idx.push_back(v);
            }
            if (idx.size() != 3) {
                throw FormatError(where + ": face has " + std::to_string(idx.size()) +
                                  " vertices; only triangles are supported, triangulate the mesh first");
            }
            Face f;
            for (std::size_t k = 0; k < 3; ++k) {
                const long n = static_cast<long>(mesh.vertices.size());
                const long resolved = idx[k] > 0 ? idx[k] - 1 : n + idx[k];
                if (resolved < 0 || resolved >= n) throw FormatError(where + ": face index out of range");
                f[k] = static_cast<VertexIndex>(resolved);
            }
            mesh.faces.push_back(f);
        }
    }
    try {
        validate_faces(mesh.faces, mesh.vertices.size());
    } catch (const ModelError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return mesh;
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
    std::string out;
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out += buf;
    }
    for (const Face& f : mesh.faces) {
        std::snprintf(buf, sizeof(buf), "f %u %u %u\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out += buf;
    }
    write_file(path, out);
}

ArticulatedModel read_model(const std::filesystem::path& path) {
    const json doc = parse_json(path);
    const std::string name = path.string();
    ArticulatedModel m;
    try {
        m.template_vertices = json_to_points(doc.at("vertices"), name + ": vertices");
        for (const auto& f : doc.at("faces")) {
            if (!f.is_array() || f.size() != 3) throw FormatError(name + ": faces must be index triples");
            Face face;
            for (std::size_t k = 0; k < 3; ++k) {
                const auto v = f[k].get<long long>();
                if (v < 0) throw FormatError(name + ": negative face index");
                face[k] = static_cast<VertexIndex>(v);
            }
            m.faces.push_back(face);
        }
        for (const auto& p : doc.at("parents")) m.parents.push_back(p.get<int>());
        const std::size_t nv = m.template_vertices.size();
        const std::size_t nj = m.parents.size();
        m.joint_regressor = json_to_matrix(doc.at("regressor"), nj, nv, name + ": regressor");
        m.skin_weights = json_to_matrix(doc.at("weights"), nv, nj, name + ": weights");
        const json& basis = doc.at("shape_basis");
        if (!basis.is_array()) throw FormatError(name + ": shape_basis must be an array");
        m.shape_basis.resize(static_cast<Eigen::Index>(3 * nv), static_cast<Eigen::Index>(basis.size()));
        for (std::size_t k = 0; k < basis.size(); ++k) {
            const auto field = json_to_points(basis[k], name + ": shape_basis[" + std::to_string(k) + "]");
            if (field.size() != nv) throw FormatError(name + ": shape_basis entries need one vector per vertex");
            for (std::size_t i = 0; i < nv; ++i) {
                m.shape_basis.block<3, 1>(static_cast<Eigen::Index>(3 * i), static_cast<Eigen::Index>(k)) = field[i];
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(name + ": " + e.what());
    }
    try {
        m.validate();
    } catch (const ModelError& e) {
        throw FormatError(name + ": " + e.what());
    }
    return m;
}

void write_model(const std::filesystem::path& path, const ArticulatedModel& m) {
    json doc;
    doc["vertices"] = points_to_json(m.template_vertices);
    json faces = json::array();
    for (const Face& f : m.faces) faces.push_back({f[0], f[1], f[2]});
    doc["faces"] = std::move(faces);
    doc["parents"] = m.parents;
    doc["regressor"] = matrix_to_json(m.joint_regressor);
    doc["weights"] = matrix_to_json(m.skin_weights);
    json basis = json::array();
    for (Eigen::Index k = 0; k < m.shape_basis.cols(); ++k) {
        json field = json::array();
        for (std::size_t i = 0; i < m.num_vertices(); ++i) {
            field.push_back(vec3_to_json(m.shape_basis.block<3, 1>(static_cast<Eigen::Index>(3 * i), k)));
        }
        basis.push_back(std::move(field));
    }
    doc["shape_basis"] = std::move(basis);
    write_json(path, doc);
}

AvatarParams read_params(const std::filesystem::path& path, const ArticulatedModel& model) {
    return params_from_json(parse_json(path), model, path.string());
}

void write_params(const std::filesystem::path& path, const AvatarParams& params) {
    write_json(path, params_to_json(params));
}

std::vector<AvatarParams> read_animation(const std::filesystem::path& path, const ArticulatedModel& model) {
    const json doc = parse_json(path);
    if (!doc.is_object() || !doc.contains("frames") || !doc["frames"].is_array()) {
        throw FormatError(path.string() + ": expected {\"frames\": [...]}");
    }
    std::vector<AvatarParams> frames;
    const auto& arr = doc["frames"];
    for (std::size_t i = 0; i < arr.size(); ++i) {
        frames.push_back(params_from_json(arr[i], model, path.string() + ": frame " + std::to_string(i)));
    }
    return frames;
}

void write_animation(const std::filesystem::path& path, const std::vector<AvatarParams>& frames) {
    json arr = json::array();
    for (const auto& f : frames) arr.push_back(params_to_json(f));
    write_json(path, json{{"frames", std::move(arr)}});
}

namespace {

constexpr char kBindingMagic[8] = {'G', 'S', 'B', 'I', 'N', 'D', '1', '\0'};
constexpr std::size_t kBindingHeader = 16;
// Per face entry: id, weight, 3 position, 4 rotation, 1 reference length.
constexpr std::size_t kBindingEntryBytes = 4 * (1 + 1 + 3 + 4 + 1);
// Tolerance for invariants of values that went through f32.
constexpr double kF32Tolerance = 1e-5;

}  // namespace

BindingTable read_binding(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const std::string name = path.string();
    if (bytes.size() < kBindingHeader || std::memcmp(bytes.data(), kBindingMagic, 8) != 0) {
        throw FormatError(name + ": missing GSBIND1 magic");
    }
    const auto n = load_le<std::uint32_t>(bytes.data() + 8);
    const auto k = load_le<std::uint32_t>(bytes.data() + 12);
    if (k == 0) throw FormatError(name + ": K must be at least 1");
    const std::size_t expected = kBindingHeader + static_cast<std::size_t>(n) * k * kBindingEntryBytes;
    if (bytes.size() != expected) {
        throw FormatError(name + ": file is " + std::to_string(bytes.size()) + " bytes, header implies " +
                          std::to_string(expected));
    }
    BindingTable t;
    t.k_faces = k;
    const std::size_t total = static_cast<std::size_t>(n) * k;
    t.face_ids.resize(total);
    t.weights.resize(total);
    t.local_positions.resize(total);
    t.local_rotations.resize(total);
    t.ref_lengths.resize(total);
    const char* p = bytes.data() + kBindingHeader;
    auto f32 = [&p]() {
        const float v = load_le<float>(p);
        p += 4;
        return static_cast<double>(v);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = i * k;
        for (std::size_t j = 0; j < k; ++j) {
            t.face_ids[base + j] = load_le<std::uint32_t>(p);
            p += 4;
        }
        for (std::size_t j = 0; j < k; ++j) t.weights[base + j] = f32();
        for (std::size_t j = 0; j < k; ++j) {
            const double x = f32(), y = f32(), z = f32();
            t.local_positions[base + j] = Vec3(x, y, z);
        }
        for (std::size_t j = 0; j < k; ++j) {
            const double w = f32(), x = f32(), y = f32(), z = f32();
            t.local_rotations[base + j] = Quat(w, x, y, z);
        }
        for (std::size_t j = 0; j < k; ++j) t.ref_lengths[base + j] = f32();
    }
    try {
        t.validate(std::numeric_limits<std::uint32_t>::max(), kF32Tolerance);
    } catch (const FormatError& e) {
        throw FormatError(name + ": " + e.what());
    }
    return t;
}

void write_binding(const std::filesystem::path& path, const BindingTable& t) {
    t.validate(std::numeric_limits<std::uint32_t>::max(), kF32Tolerance);
    const std::size_t n = t.num_splats();
    const std::size_t k = t.k_faces;
    std::string out(kBindingMagic, 8);
    out.reserve(kBindingHeader + n * k * kBindingEntryBytes);
    store_le(out, static_cast<std::uint32_t>(n));
    store_le(out, static_cast<std::uint32_t>(k));
    auto f32 = [&out](double v) { store_le(out, static_cast<float>(v)); };
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = i * k;
        for (std::size_t j = 0; j < k; ++j) store_le(out, t.face_ids[base + j]);
        for (std::size_t j = 0; j < k; ++j) f32(t.weights[base + j]);
        for (std::size_t j = 0; j < k; ++j) {
            const Vec3& v = t.local_positions[base + j];
            f32(v.x());
            f32(v.y());
            f32(v.z());
        }
        for (std::size_t j = 0; j < k; ++j) {
            const Quat& q = t.local_rotations[base + j];
            f32(q.w());
            f32(q.x());
            f32(q.y());
            f32(q.z());
        }
        for (std::size_t j = 0; j < k; ++j) f32(t.ref_lengths[base + j]);
    }
    write_file(path, out);
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.width <= 0 || image.height <= 0) throw IoError("cannot write an empty image to " + path.string());
    std::vector<png_byte> pixels(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        pixels[i] = static_cast<png_byte>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot write " + path.string() + ": " + msg);
    }
}

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        throw IoError("cannot read " + path.string() + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<png_byte> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw FormatError("cannot decode " + path.string() + ": " + msg);
    }
    Image img(static_cast<int>(png.width), static_cast<int>(png.height));
    for (std::size_t i = 0; i < pixels.size(); ++i) img.data[i] = pixels[i] / 255.0;
    return img;
}

}  // namespace petsplat
