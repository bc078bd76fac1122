/* Spin forever; the harness must cut this off at its timeout. */
int main(void) {
    volatile unsigned x = 0;
    for (;;) {
        x++;
    }
    return 0;
}
