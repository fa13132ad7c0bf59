int main() {
  int x = 4;
  try {
    throw &x;
  } catch (char *) {
    assert(0);
  } catch (const int *p) {
    assert(*p == 4);
  }
  return 0;
}
// VERDICT: SUCCESSFUL
