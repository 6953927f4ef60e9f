#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "onglab/config.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const onglab::ExperimentConfig cfg = onglab::parse_config(args);
        return onglab::run(cfg);
    } catch (const onglab::ConfigError& e) {
        std::cerr << "error [config]: " << e.what() << '\n';
        return 2;
    } catch (const onglab::FormatError& e) {
        std::cerr << "error [format]: " << e.what() << '\n';
        return 4;
    } catch (const onglab::IoError& e) {
        std::cerr << "error [io]: " << e.what() << '\n';
        return 5;
    } catch (const onglab::NumericalError& e) {
        std::cerr << "error [numerical]: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
