#include <vector>
int main() { return 0; }
// VERDICT: ERROR
