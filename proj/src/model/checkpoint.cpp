#include "tabspec/model/checkpoint.hpp"

#include "tabspec/io.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace tabspec::model {

namespace {

nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

Matrix json_matrix(const nlohmann::json& j, Eigen::Index cols) {
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    return m;
}

}  // namespace

void save_checkpoint(const FTTransformer& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<char> bytes;
    std::ostringstream manifest;
    std::size_t offset = 0;
    for (const auto& p : model.params()) {
        manifest << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << ' ' << offset << '\n';
        for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
                const double v = p.value(r, c);
                char buf[sizeof(double)];
                std::memcpy(buf, &v, sizeof(double));
                bytes.insert(bytes.end(), buf, buf + sizeof(double));
            }
        }
        offset += static_cast<std::size_t>(p.value.size());
    }
    io::write_atomic_binary(dir / "weights.bin", bytes);
    io::write_atomic(dir / "manifest.txt", manifest.str());

    const ModelSpec& s = model.spec();
    nlohmann::json j;
    j["spec"] = {{"d_token", s.d_token},
                 {"d_pe", s.d_pe},
                 {"n_layers", s.n_layers},
                 {"n_heads", s.n_heads},
                 {"ffn_factor", s.ffn_factor},
                 {"attention_dropout", s.attention_dropout},
                 {"ffn_dropout", s.ffn_dropout},
                 {"residual_dropout", s.residual_dropout},
                 {"pe_mode", to_string(s.pe_mode)},
                 {"alpha", s.alpha},
                 {"task", to_string(s.task)},
                 {"n_classes", s.n_classes},
                 {"seed", s.seed}};
    j["groups"] = model.groups();
    j["n_columns"] = model.n_columns();
    j["pe_base"] = matrix_json(model.pe_base());
    j["target_mean"] = model.target_mean();
    j["target_scale"] = model.target_scale();
    io::write_atomic(dir / "model.json", j.dump(2) + "\n");
}

FTTransformer load_checkpoint(const std::filesystem::path& dir) {
    const auto j = nlohmann::json::parse(io::read_text(dir / "model.json"));
    const auto& js = j.at("spec");
    ModelSpec s;
    s.d_token = js.at("d_token").get<int>();
    s.d_pe = js.at("d_pe").get<int>();
    s.n_layers = js.at("n_layers").get<int>();
    s.n_heads = js.at("n_heads").get<int>();
    s.ffn_factor = js.at("ffn_factor").get<double>();
    s.attention_dropout = js.at("attention_dropout").get<double>();
    s.ffn_dropout = js.at("ffn_dropout").get<double>();
    s.residual_dropout = js.at("residual_dropout").get<double>();
    s.pe_mode = parse_pe_mode(js.at("pe_mode").get<std::string>());
    s.alpha = js.at("alpha").get<double>();
    s.task = parse_task(js.at("task").get<std::string>());
    s.n_classes = js.at("n_classes").get<int>();
    s.seed = js.at("seed").get<std::uint64_t>();

    FTTransformer model(s, j.at("groups").get<Groups>(), j.at("n_columns").get<std::size_t>(),
                        json_matrix(j.at("pe_base"), s.d_pe));
    model.set_target_scaling(j.at("target_mean").get<double>(), j.at("target_scale").get<double>());

    std::ifstream bin(dir / "weights.bin", std::ios::binary);
    if (!bin) throw Error("cannot open " + (dir / "weights.bin").string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    std::istringstream manifest(io::read_text(dir / "manifest.txt"));
    std::string name;
    Eigen::Index rows, cols;
    std::size_t offset;
    std::size_t seen = 0;
    while (manifest >> name >> rows >> cols >> offset) {
        Param& p = model.params()[model.params().find(name)];
        if (p.value.rows() != rows || p.value.cols() != cols) throw Error("checkpoint shape mismatch for '" + name + "'");
        if ((offset + static_cast<std::size_t>(rows * cols)) * sizeof(double) > bytes.size())
            throw Error("checkpoint weights truncated");
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                std::memcpy(&p.value(r, c), bytes.data() + (offset + static_cast<std::size_t>(r * cols + c)) * sizeof(double),
                            sizeof(double));
        ++seen;
    }
    if (seen != model.params().size()) throw Error("checkpoint manifest does not cover every parameter");
    return model;
}

}  // namespace tabspec::model
